"""How estimation error shrinks as the observer gain r grows.

Reruns the linear test plant at several gains (dwell times, thresholds and
the step size follow r) and fits log-log slopes of the windowed errors.
"""
import sys

from etadrc.analysis import scaling_study
from etadrc.cli import render_report
from etadrc.config import build_sim_config, validate_config

N = int(sys.argv[1]) if len(sys.argv) > 1 else 50

cfg = build_sim_config(validate_config({"preset": "linear-n2"}))
report = scaling_study(cfg, [10.0, 20.0, 40.0], N=N)
print(render_report(report.to_dict()))
