"""Closed-loop Euler-Maruyama simulation with event supervision.

One step from t_i to t_{i+1} = (i+1) h:

1. take dB1, dB2 from the trajectory's own streams;
2. evaluate plant and observer vector fields at t_i with the held output,
   the held control and the noise values at t_i;
3. Euler-advance x, xhat, B1 and w2 jointly, then w1 = psi(t_{i+1}, B1);
4. test the observer trigger, then the controller trigger, at t_{i+1};
   new holds take effect from the next vector-field evaluation.

Triggers are only tested on the grid, so the effective dwell is max(tau, h).

Trajectories are integrated in batches with components on axis 0 and
trajectories on axis 1; every trajectory draws from its own
(seed, stream_id) Philox streams, so a batch gives the same sample paths as
running each member alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .controller import control_value, held_deviation
from .errors import DimensionError, DivergenceError, DomainError, PreconditionError
from .gains import DesignGains, dwell_times, validate_design
from .noise import BoundedNoiseSpec, RngStream, Substream, bounded_noise, ou_update
from .observer import observer_rhs
from .plant import SystemSpec, _drift

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9
STABILITY_FACTOR = 0.01
DEFAULT_STEP = 1e-4
MAX_RECORDED_SAMPLES = 200_000
ENSEMBLE_CHUNK = 64
_NOISE_BLOCK = 4096
_GUARD_EVERY = 16


def stable_step(h_user: float, r: float) -> float:
    """Explicit-Euler step cap: observer error poles sit near -2r for the nominal design."""
    return min(h_user, STABILITY_FACTOR / (2.0 * r))


@dataclass(frozen=True)
class SimConfig:
    spec: SystemSpec
    design: DesignGains
    noise: BoundedNoiseSpec
    rho1: float
    rho2: float
    x0: tuple
    xhat0: tuple
    T: float
    w2_0: float = 0.0
    h: float = DEFAULT_STEP
    record_stride: Optional[int] = None
    seed: int = 0
    stream_id: int = 0
    noise_enabled: bool = True
    check_assumptions: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "xhat0", tuple(float(v) for v in self.xhat0))
        n = self.spec.n
        if self.design.n != n:
            raise DimensionError(f"design n={self.design.n} does not match system n={n}")
        if len(self.x0) != n or len(self.xhat0) != n + 1:
            raise DimensionError(f"x0 needs {n} and xhat0 needs {n + 1} entries")
        if not (self.T > 0 and self.h > 0):
            raise DomainError("T and h must be positive")
        if self.h > self.T:
            raise DomainError("step h exceeds horizon T")
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise DomainError("rho1 and rho2 must be positive")
        if self.record_stride is not None and self.record_stride < 1:
            raise DomainError("record_stride must be >= 1")

    @property
    def step(self) -> float:
        return stable_step(self.h, self.design.r)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.step + 1e-9))

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, math.ceil(self.n_steps / MAX_RECORDED_SAMPLES))

    def with_gain(self, r: float) -> "SimConfig":
        return replace(self, design=replace(self.design, r=float(r)))


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray        # (m, n)
    xhat: np.ndarray     # (m, n+1)
    xtotal: np.ndarray
    u: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    y_held: np.ndarray
    trig_eso: np.ndarray
    trig_ctrl: np.ndarray
    stream_id: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def header(self):
        n = self.n
        return (["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"xhat{i}" for i in range(1, n + 2)]
                + ["xtotal", "u", "w1", "w2", "trig_eso", "trig_ctrl"])

    def columns(self):
        cols = [self.t] + list(self.x.T) + list(self.xhat.T) + [self.xtotal, self.u, self.w1, self.w2]
        return cols, [self.trig_eso, self.trig_ctrl]

    def to_csv(self, path):
        floats, flags = self.columns()
        text_cols = [[repr(v) for v in c.tolist()] for c in floats]
        text_cols += [["1" if b else "0" for b in c.tolist()] for c in flags]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.header()) + "\n")
            fh.writelines(",".join(row) + "\n" for row in zip(*text_cols))

    @classmethod
    def from_csv(cls, path, stream_id=0):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        n = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
        col = {name: i for i, name in enumerate(header)}
        return cls(
            t=data[:, 0], x=data[:, 1:1 + n], xhat=data[:, 1 + n:2 * n + 2],
            xtotal=data[:, col["xtotal"]], u=data[:, col["u"]], w1=data[:, col["w1"]],
            w2=data[:, col["w2"]], y_held=np.full(len(data), np.nan),
            trig_eso=data[:, col["trig_eso"]] > 0, trig_ctrl=data[:, col["trig_ctrl"]] > 0,
            stream_id=stream_id,
        )


@dataclass
class EventLog:
    """Execution times of both mechanisms with the values held at each event."""

    eso_times: np.ndarray
    eso_held: np.ndarray       # (k,) transmitted outputs
    ctrl_times: np.ndarray
    ctrl_held: np.ndarray      # (l, n+1) sampled observer states
    tau: float
    upsilon: float
    stream_id: int = 0

    def times(self, mech):
        return self.eso_times if mech == "eso" else self.ctrl_times

    def dwell(self, mech):
        return self.tau if mech == "eso" else self.upsilon

    def dwell_violations(self, mech) -> int:
        t = self.times(mech)
        return int(np.count_nonzero(t[1:] - t[:-1] < self.dwell(mech)))

    def entries(self):
        """Events ordered by time; observer before controller at equal times."""
        items = [("eso", k + 1, t) for k, t in enumerate(self.eso_times.tolist())]
        items += [("ctrl", k + 1, t) for k, t in enumerate(self.ctrl_times.tolist())]
        items.sort(key=lambda e: (e[2], e[0] != "eso", e[1]))
        return items

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for mech, idx, t in self.entries():
                fh.write(json.dumps({"mech": mech, "idx": idx, "t": t}) + "\n")

    @staticmethod
    def read_jsonl(path):
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


def _check_design(cfg: SimConfig, force: bool):
    report = validate_design(cfg.design, cfg.spec)
    if not report.passed:
        if not force:
            raise PreconditionError("design fails validation:\n" + report.format())
        warnings.warn("simulating a design that fails validation", RuntimeWarning, stacklevel=3)
    return report


def _simulate_batch(cfg: SimConfig, stream_ids):
    spec, design = cfg.spec, cfg.design
    n = spec.n
    N = len(stream_ids)
    h = cfg.step
    n_steps = cfg.n_steps
    stride = cfg.stride
    tau, upsilon = dwell_times(design.r, n, design.eps1, design.eps2)
    thr1 = design.eso_threshold
    thr2 = design.ctrl_threshold
    rho1, rho2 = cfg.rho1, cfg.rho2
    check = cfg.check_assumptions
    noise = cfg.noise

    x = np.repeat(np.array(cfg.x0)[:, None], N, axis=1)
    xh = np.repeat(np.array(cfg.xhat0)[:, None], N, axis=1)
    B1 = np.zeros(N)
    w2 = np.full(N, float(cfg.w2_0))
    w1 = np.asarray(bounded_noise(noise, 0.0, B1, check), dtype=float) * np.ones(N)
    y_held = x[0].copy()
    eso_last = np.zeros(N)
    xh_held = xh.copy()
    u = np.asarray(control_value(xh_held, design), dtype=float)
    ctrl_last = np.zeros(N)

    streams1 = [RngStream(cfg.seed, s, Substream.B1) for s in stream_ids]
    streams2 = [RngStream(cfg.seed, s, Substream.B2) for s in stream_ids]
    sqrt_h = math.sqrt(h)

    m = n_steps // stride + 1
    rec_t = np.empty(m)
    rec_x = np.empty((m, n, N))
    rec_xh = np.empty((m, n + 1, N))
    rec_tot = np.empty((m, N))
    rec_u = np.empty((m, N))
    rec_w1 = np.empty((m, N))
    rec_w2 = np.empty((m, N))
    rec_yh = np.empty((m, N))
    rec_te = np.zeros((m, N), dtype=bool)
    rec_tc = np.zeros((m, N), dtype=bool)

    def record(j, t, fired_e, fired_c):
        rec_t[j] = t
        rec_x[j] = x
        rec_xh[j] = xh
        rec_tot[j] = spec.f(t, x, w1, w2)
        rec_u[j] = u
        rec_w1[j] = w1
        rec_w2[j] = w2
        rec_yh[j] = y_held
        rec_te[j] = fired_e
        rec_tc[j] = fired_c

    ev_e = [(0.0, np.arange(N), y_held.copy())]
    ev_c = [(0.0, np.arange(N), xh_held.T.copy())]
    ones = np.ones(N, dtype=bool)
    record(0, 0.0, ones, ones)

    dB1 = dB2 = None
    dx = np.empty((n, N))
    dxh = np.empty((n + 1, N))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            j = i % _NOISE_BLOCK
            if j == 0:
                block = min(_NOISE_BLOCK, n_steps - i)
                if cfg.noise_enabled:
                    dB1 = sqrt_h * np.array([s.standard_normals(block) for s in streams1]).T.copy()
                    dB2 = sqrt_h * np.array([s.standard_normals(block) for s in streams2]).T.copy()
                else:
                    dB1 = dB2 = np.zeros((block, N))
            t = i * h
            fx = spec.f(t, x, w1, w2)
            _drift(spec, t, x, u, fx, out=dx)
            observer_rhs(xh, y_held, u, design, spec, out=dxh)
            x = x + h * dx
            xh = xh + h * dxh
            B1 = B1 + dB1[j]
            w2 = ou_update(w2, rho1, rho2, h, dB2[j])
            t1 = (i + 1) * h
            w1 = np.asarray(bounded_noise(noise, t1, B1, check), dtype=float) * ones

            y = x[0]
            fire_e = (t1 - eso_last >= tau) & (np.abs(y - y_held) >= thr1)
            if fire_e.any():
                idx = np.flatnonzero(fire_e)
                y_held = np.where(fire_e, y, y_held)
                eso_last = np.where(fire_e, t1, eso_last)
                ev_e.append((t1, idx, y[idx]))
            fire_c = (t1 - ctrl_last >= upsilon) & (held_deviation(xh, xh_held) >= thr2)
            if fire_c.any():
                idx = np.flatnonzero(fire_c)
                xh_held = np.where(fire_c, xh, xh_held)
                ctrl_last = np.where(fire_c, t1, ctrl_last)
                u = np.asarray(control_value(xh_held, design), dtype=float)
                ev_c.append((t1, idx, xh[:, idx].T.copy()))

            if (i + 1) % _GUARD_EVERY == 0 or i + 1 == n_steps:
                ok = np.all(np.abs(x) <= DIVERGENCE_LIMIT, axis=0) & np.all(np.abs(xh) <= DIVERGENCE_LIMIT, axis=0)
                if not ok.all():
                    bad = int(np.flatnonzero(~ok)[0])
                    raise DivergenceError(t1, stream_ids[bad])
            if (i + 1) % stride == 0:
                record((i + 1) // stride, t1, fire_e, fire_c)

    eso_logs = _split_events(ev_e, N)
    ctrl_logs = _split_events(ev_c, N)
    out = []
    for b, sid in enumerate(stream_ids):
        rec = TrajectoryRecord(
            t=rec_t.copy(), x=rec_x[:, :, b].copy(), xhat=rec_xh[:, :, b].copy(),
            xtotal=rec_tot[:, b].copy(), u=rec_u[:, b].copy(), w1=rec_w1[:, b].copy(),
            w2=rec_w2[:, b].copy(), y_held=rec_yh[:, b].copy(),
            trig_eso=rec_te[:, b].copy(), trig_ctrl=rec_tc[:, b].copy(), stream_id=sid,
        )
        (te, ve), (tc, vc) = eso_logs[b], ctrl_logs[b]
        out.append((rec, EventLog(te, ve, tc, vc, tau, upsilon, stream_id=sid)))
    return out


def _split_events(events, N):
    times = np.concatenate([np.full(len(idx), t) for t, idx, _ in events])
    owner = np.concatenate([idx for _, idx, _ in events])
    vals = np.concatenate([v for _, _, v in events])
    order = np.argsort(owner, kind="stable")
    times, owner, vals = times[order], owner[order], vals[order]
    bounds = np.searchsorted(owner, np.arange(N + 1))
    return [(times[bounds[b]:bounds[b + 1]], vals[bounds[b]:bounds[b + 1]]) for b in range(N)]


def run_trajectory(cfg: SimConfig, force: bool = False):
    """Simulate one closed-loop sample path; returns (TrajectoryRecord, EventLog)."""
    _check_design(cfg, force)
    return _simulate_batch(cfg, [cfg.stream_id])[0]


def run_ensemble(cfg: SimConfig, N: int, threads: Optional[int] = None, force: bool = False,
                 chunk: int = ENSEMBLE_CHUNK):
    """N independent paths with stream_id = 0..N-1, ordered by stream_id.

    Batches are cut at fixed stream boundaries, so the thread count never
    changes the numbers.
    """
    if N < 1:
        raise DomainError("ensemble size must be >= 1")
    _check_design(cfg, force)
    batches = [list(range(s, min(s + chunk, N))) for s in range(0, N, chunk)]
    if threads is None or threads <= 1 or len(batches) == 1:
        parts = [_simulate_batch(cfg, b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _simulate_batch(cfg, b), batches))
    return [item for part in parts for item in part]
