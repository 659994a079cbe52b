"""Brownian drivers, bounded noise w1 = psi(t, B1(t)) and colored (OU) noise w2."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssumptionViolation, DomainError


class Substream(enum.IntEnum):
    B1 = 0
    B2 = 1


class RngStream:
    """Counter-based normal stream keyed by (seed, stream_id, substream).

    Backed by Philox; the key is derived through ``SeedSequence`` spawn keys
    so distinct triples give independent streams and equal triples replay
    bit-for-bit.  Drawing in blocks yields the same sequence as drawing one
    value at a time.
    """

    def __init__(self, seed: int, stream_id: int = 0, substream: Substream = Substream.B1):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.substream = Substream(substream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(self.substream)))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def standard_normals(self, m: int) -> np.ndarray:
        return self._gen.standard_normal(m)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, substream={self.substream.name})"


def brownian_increment(stream: RngStream, h: float) -> float:
    """One increment B(t+h) - B(t) ~ Normal(0, h)."""
    if not h > 0:
        raise DomainError(f"step h must be positive, got {h}")
    return math.sqrt(h) * float(stream.standard_normals(1)[0])


def brownian_increments(stream: RngStream, h: float, m: int) -> np.ndarray:
    if not h > 0:
        raise DomainError(f"step h must be positive, got {h}")
    return math.sqrt(h) * stream.standard_normals(m)


@dataclass(frozen=True)
class BoundedNoiseSpec:
    """psi(t, b) with a declared bound alpha5 (sampled, never proven)."""

    psi: Callable
    alpha5: float
    name: str = "custom"


def bounded_noise(spec: BoundedNoiseSpec, t, B1, check: bool = False):
    w1 = spec.psi(t, B1)
    if check and np.any(np.abs(w1) > spec.alpha5):
        raise AssumptionViolation("A2", f"|psi(t, B1)| exceeds alpha5={spec.alpha5} at t={t!r}")
    return w1


def sample_psi_bound(spec: BoundedNoiseSpec, t_max=20.0, b_max=10.0, m=1000) -> float:
    """Grid sup of |psi| over [0, t_max] x [-b_max, b_max]."""
    t = np.linspace(0.0, t_max, m)[:, None]
    b = np.linspace(-b_max, b_max, m)[None, :]
    return float(np.max(np.abs(spec.psi(t, b))))


@dataclass(frozen=True)
class OuState:
    w2: float
    rho1: float
    rho2: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise DomainError("rho1 and rho2 must be positive")


def ou_update(w2, rho1, rho2, h, dB2):
    return w2 - rho1 * w2 * h + rho1 * math.sqrt(2.0 * rho2) * dB2


def ou_step(state: OuState, h: float, dB2) -> OuState:
    """Euler-Maruyama step of dw2 = -rho1 w2 dt + rho1 sqrt(2 rho2) dB2."""
    if not h > 0:
        raise DomainError(f"step h must be positive, got {h}")
    return OuState(ou_update(state.w2, state.rho1, state.rho2, h, dB2), state.rho1, state.rho2)


def ou_stationary_variance(rho1: float, rho2: float) -> float:
    # rho1^2 * 2 rho2 / (2 rho1)
    return rho1 * rho2
