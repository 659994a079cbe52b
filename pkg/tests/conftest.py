import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from etadrc.analysis import scaling_study  # noqa: E402
from etadrc.config import build_sim_config, validate_config  # noqa: E402
from etadrc.simulator import run_ensemble  # noqa: E402

SEC5_SEEDS = 10
SEC5_TIMING = {}
ACCEPTANCE_LINES = {}


def sec5_config(**sim):
    return build_sim_config(validate_config({"preset": "paper-sec5", "sim": sim}))


@pytest.fixture(scope="session")
def sec5_ten_paths():
    """Ten full-horizon sample paths of the reference experiment (stream ids 0..9)."""
    cfg = sec5_config(T=20.0, h=1e-4, record_stride=10)
    start = time.perf_counter()
    ens = run_ensemble(cfg, SEC5_SEEDS)
    SEC5_TIMING["per_path_s"] = (time.perf_counter() - start) / SEC5_SEEDS
    return cfg, ens


@pytest.fixture(scope="session")
def sec5_hundred_paths():
    cfg = sec5_config(T=20.0, h=1e-4, record_stride=1000)
    return cfg, run_ensemble(cfg, 100)


@pytest.fixture(scope="session")
def linear_scaling():
    cfg = build_sim_config(validate_config({"preset": "linear-n2"}))
    return scaling_study(cfg, [10.0, 20.0, 40.0], N=200)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
