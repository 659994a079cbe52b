"""Event-triggered extended state observer.

The observer runs on the last transmitted output y(t_k).  A new output is
transmitted when the dwell time tau has elapsed and the output has moved by at
least kappa1 * r**-(n + 1/2) since the last transmission.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionError
from .gains import DesignGains
from .plant import SystemSpec


@dataclass
class EsoState:
    xhat: np.ndarray
    y_held: float
    t_last: float = 0.0
    k: int = 1

    @classmethod
    def initial(cls, xhat0, y0):
        """State after the first transmission at t_1 = 0."""
        return cls(np.array(xhat0, dtype=float), float(y0), 0.0, 1)


def observer_rhs(xhat, y_held, u, design: DesignGains, spec: SystemSpec, out=None):
    """Observer vector field; ``xhat`` may be (n+1,) or a batch (n+1, N)."""
    n = spec.n
    if xhat.shape[0] != n + 1 or design.n != n:
        raise DimensionError(f"observer state must have n+1={n + 1} components")
    gains = design.injection_gains
    innov = y_held - xhat[0]
    rows = [xhat[i + 1] + gains[i] * innov + spec.g[i](xhat[: i + 1]) for i in range(n)]
    rows[n - 1] = rows[n - 1] + u
    rows.append(gains[n] * innov)
    if out is None:
        return np.stack(np.broadcast_arrays(*rows))
    for i, row in enumerate(rows):
        out[i] = row
    return out


def eso_drift(state: EsoState, u, design: DesignGains, spec: SystemSpec):
    return observer_rhs(np.asarray(state.xhat, dtype=float), state.y_held, u, design, spec)


def etm1_should_trigger(y_now, state: EsoState, t, tau, design: DesignGains, n=None):
    """Dwell elapsed and output deviation at or above kappa1 * r**-(n+1/2)."""
    n = design.n if n is None else n
    threshold = design.kappa1 * design.r ** -(n + 0.5)
    return (t - state.t_last >= tau) & (np.abs(y_now - state.y_held) >= threshold)


def eso_on_trigger(state: EsoState, y_now, t, *, tau=None, design=None) -> EsoState:
    """Transmit y_now at time t.  Passing ``tau`` and ``design`` enables the contract check."""
    if tau is not None and design is not None and not etm1_should_trigger(y_now, state, t, tau, design):
        raise ContractViolation(f"observer trigger condition does not hold at t={t!r}")
    return EsoState(state.xhat, float(y_now), float(t), state.k + 1)
