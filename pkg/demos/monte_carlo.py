"""Monte Carlo statistics for the reference experiment.

Every path gets its own random stream, so results do not depend on how the
ensemble is batched.  Prints the windowed mean-square errors and the event
count spread.
"""
import sys

from etadrc.analysis import mc_summary
from etadrc.cli import render_report
from etadrc.config import build_sim_config, validate_config
from etadrc.simulator import run_ensemble

N = int(sys.argv[1]) if len(sys.argv) > 1 else 8

cfg = build_sim_config(validate_config({"preset": "paper-sec5", "sim": {"record_stride": 100}}))
ens = run_ensemble(cfg, N)
summary = mc_summary(ens, window_start=15.0)
print(render_report(summary.to_dict()))
