"""Lower-triangular plant and its total disturbance.

State vectors keep components on axis 0, so the same callables work for a
single state of shape (n,) and for a batch of shape (n, N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AssumptionViolation, DimensionError


@dataclass(frozen=True)
class SystemSpec:
    """Plant x_i' = x_{i+1} + g_i(x_1..x_i), x_n' = f(t, x, w1, w2) + g_n(x) + u.

    ``f(t, x, w1, w2)`` and ``g[i](x[:i+1])`` must accept component-major
    arrays.  ``L`` are Lipschitz constants of the g_i; ``alphas`` the growth
    constants (alpha_1..alpha_4) declared for f.  ``phi1`` optionally gives the
    w1-dependent growth term of |f| + |df/dt|.
    """

    n: int
    f: Callable
    g: Sequence[Callable]
    L: tuple
    alphas: tuple = (0.0, 0.0, 0.0, 0.0)
    phi1: Optional[Callable] = None
    name: str = "custom"
    notes: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "L", tuple(float(v) for v in self.L))
        object.__setattr__(self, "alphas", tuple(float(v) for v in self.alphas))
        if self.n < 1:
            raise DimensionError("n must be >= 1")
        if len(self.g) != self.n or len(self.L) != self.n:
            raise DimensionError(f"need n={self.n} functions g_i and Lipschitz constants")
        if len(self.alphas) != 4:
            raise DimensionError("alphas must hold alpha_1..alpha_4")
        if min(self.L) < 0 or min(self.alphas) < 0:
            raise AssumptionViolation("A1", "Lipschitz and growth constants must be nonnegative")
        for i, gi in enumerate(self.g):
            val = gi(np.zeros(i + 1))
            if val != 0:
                raise AssumptionViolation("A1", f"g_{i + 1}(0) = {val!r}, expected 0")

    def check_lipschitz(self, rng=None, pairs=1000, scale=5.0):
        """Sampled smoke check of |g_i(a) - g_i(b)| <= L_i ||a - b||."""
        rng = np.random.default_rng(0) if rng is None else rng
        for i, gi in enumerate(self.g):
            a = rng.uniform(-scale, scale, size=(i + 1, pairs))
            b = rng.uniform(-scale, scale, size=(i + 1, pairs))
            lhs = np.abs(gi(a) - gi(b))
            rhs = self.L[i] * np.linalg.norm(a - b, axis=0)
            if np.any(lhs > rhs * (1 + 1e-12) + 1e-12):
                raise AssumptionViolation("A1", f"g_{i + 1} exceeds Lipschitz constant L_{i + 1}={self.L[i]}")


def _check_state(spec: SystemSpec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.n:
        raise DimensionError(f"state has {x.shape[0]} components, system has n={spec.n}")
    return x


def plant_drift(spec: SystemSpec, t, x, u, w1, w2):
    x = _check_state(spec, x)
    return _drift(spec, t, x, u, spec.f(t, x, w1, w2))


def _drift(spec, t, x, u, fx, out=None):
    n = spec.n
    rows = [x[i + 1] + spec.g[i](x[: i + 1]) for i in range(n - 1)]
    rows.append(fx + spec.g[n - 1](x) + u)
    if out is None:
        return np.stack(np.broadcast_arrays(*rows))
    for i, row in enumerate(rows):
        out[i] = row
    return out


def total_disturbance(spec: SystemSpec, t, x, w1, w2):
    """Extended state x_{n+1} = f(t, x, w1, w2)."""
    x = _check_state(spec, x)
    return spec.f(t, x, w1, w2)
