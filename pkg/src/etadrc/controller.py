"""Event-triggered ADRC law.

u = sum_i theta^(n+1-i) c_i xhat_i(t*_l) - xhat_{n+1}(t*_l), held between
controller events.  The controller resamples the observer when the dwell
upsilon has elapsed and sum_i |xhat_i - xhat_i(t*_l)| >= kappa2 / sqrt(r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionError
from .gains import DesignGains


@dataclass
class CtrlState:
    xhat_held: np.ndarray
    t_last: float
    l: int
    u: float

    @classmethod
    def initial(cls, xhat0, design: DesignGains):
        held = np.array(xhat0, dtype=float)
        return cls(held, 0.0, 1, control_value(held, design))


def control_value(xhat_held, design: DesignGains):
    xhat_held = np.asarray(xhat_held, dtype=float)
    if xhat_held.shape[0] != design.n + 1:
        raise DimensionError(f"held estimate must have n+1={design.n + 1} components")
    # explicit left-to-right sum: BLAS kernels round differently with batch width
    gains = design.feedback_gains
    u = gains[0] * xhat_held[0]
    for i in range(1, gains.size):
        u = u + gains[i] * xhat_held[i]
    return u


def held_deviation(xhat_now, xhat_held):
    d = np.abs(xhat_now - xhat_held)
    total = d[0]
    for i in range(1, d.shape[0]):
        total = total + d[i]
    return total


def etm2_should_trigger(xhat_now, state: CtrlState, t, upsilon, design: DesignGains):
    threshold = design.kappa2 * design.r ** -0.5
    return (t - state.t_last >= upsilon) & (held_deviation(xhat_now, state.xhat_held) >= threshold)


def ctrl_on_trigger(state: CtrlState, xhat_now, t, design: DesignGains, *, upsilon=None) -> CtrlState:
    """Resample the observer; passing ``upsilon`` enables the contract check."""
    if upsilon is not None and not etm2_should_trigger(xhat_now, state, t, upsilon, design):
        raise ContractViolation(f"controller trigger condition does not hold at t={t!r}")
    held = np.array(xhat_now, dtype=float)
    return CtrlState(held, float(t), state.l + 1, float(control_value(held, design)))
