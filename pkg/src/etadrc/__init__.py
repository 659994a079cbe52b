"""Event-triggered ADRC simulation for uncertain lower-triangular stochastic systems."""

__version__ = "0.1.0"

from .controller import CtrlState, control_value, ctrl_on_trigger, etm2_should_trigger
from .gains import (
    DesignGains,
    build_H,
    build_J,
    certify_r_star,
    dwell_times,
    is_hurwitz,
    lambda_coefficients,
    solve_lyapunov,
    validate_design,
)
from .noise import BoundedNoiseSpec, OuState, RngStream, Substream, bounded_noise, brownian_increment, ou_step
from .observer import EsoState, eso_drift, eso_on_trigger, etm1_should_trigger
from .plant import SystemSpec, plant_drift, total_disturbance
from .simulator import EventLog, SimConfig, TrajectoryRecord, run_ensemble, run_trajectory
