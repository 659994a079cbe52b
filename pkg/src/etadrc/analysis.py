"""Monte Carlo summaries and gain-scaling studies for the closed loop.

Estimation error of component i is x_i - xhat_i for i <= n and
xtotal - xhat_{n+1} for the extended state.  Windowed statistics use
[window_start, T]; the default window is the last quarter of the horizon.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, PreconditionError
from .gains import validate_design
from .simulator import run_ensemble

SUP_QUANTILES = (0.5, 0.9, 0.99)


def estimation_errors(rec) -> np.ndarray:
    """(m, n+1) array of x_i - xhat_i, with the total disturbance as x_{n+1}."""
    truth = np.column_stack([rec.x, rec.xtotal])
    return truth - rec.xhat


def default_window_start(T: float) -> float:
    return 0.75 * T


@dataclass
class McSummary:
    t: np.ndarray
    mse: np.ndarray               # (m, n+1) E|x_i - xhat_i|^2
    ms_state: np.ndarray          # (m, n)   E|x_i|^2
    window_start: float
    window_mse: np.ndarray        # (n+1,) time average of mse over the window
    window_mse_se: np.ndarray     # Monte Carlo standard error of window_mse
    window_state_ms: float        # time average of sum_i E|x_i|^2
    window_abs_state: np.ndarray  # (n,) time average of E|x_i|
    sup_err: np.ndarray           # (N, n+1) per-path sup over the window
    sup_err_quantiles: dict
    events: "EventReport"
    N: int
    stream_ids: list = field(default_factory=list)

    def to_dict(self):
        return {
            "kind": "mc_summary",
            "N": self.N,
            "stream_ids": list(self.stream_ids),
            "window_start": self.window_start,
            "window_mse": self.window_mse.tolist(),
            "window_mse_se": self.window_mse_se.tolist(),
            "window_state_ms": self.window_state_ms,
            "window_abs_state": self.window_abs_state.tolist(),
            "sup_err_quantiles": {k: v.tolist() for k, v in self.sup_err_quantiles.items()},
            "events": self.events.to_dict(),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_curves(self, path):
        n1 = self.mse.shape[1]
        header = (["t"] + [f"mse{i}" for i in range(1, n1 + 1)]
                  + [f"ms_x{i}" for i in range(1, n1)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.t)):
                w.writerow([repr(float(self.t[k]))] + [repr(float(v)) for v in self.mse[k]]
                           + [repr(float(v)) for v in self.ms_state[k]])


def mc_summary(ensemble, window_start=None, T=None) -> McSummary:
    """Moments across trajectories per grid point plus windowed per-path sup errors."""
    if not ensemble:
        raise DomainError("empty ensemble")
    recs = [rec for rec, _ in ensemble]
    t = recs[0].t
    for rec in recs[1:]:
        if rec.t.shape != t.shape or not np.array_equal(rec.t, t):
            raise DomainError("trajectories do not share a time grid")
    T = float(t[-1]) if T is None else T
    window_start = default_window_start(T) if window_start is None else window_start
    if not window_start < T:
        raise DomainError("window_start must be before the horizon")
    err = np.stack([estimation_errors(rec) for rec in recs])      # (N, m, n+1)
    xs = np.stack([rec.x for rec in recs])                          # (N, m, n)
    N = len(recs)
    mse = np.mean(err ** 2, axis=0)
    ms_state = np.mean(xs ** 2, axis=0)
    w = t >= window_start
    per_path = np.mean(err[:, w, :] ** 2, axis=1)                   # (N, n+1)
    window_mse = per_path.mean(axis=0)
    se = per_path.std(axis=0, ddof=1) / math.sqrt(N) if N > 1 else np.full(per_path.shape[1], np.nan)
    sup_err = np.max(np.abs(err[:, w, :]), axis=1)
    quant = {f"q{int(q * 100)}": np.quantile(sup_err, q, axis=0) for q in SUP_QUANTILES}
    T_events = T
    return McSummary(
        t=t, mse=mse, ms_state=ms_state, window_start=window_start,
        window_mse=window_mse, window_mse_se=se,
        window_state_ms=float(np.mean(ms_state[w].sum(axis=1))),
        window_abs_state=np.mean(np.abs(xs[:, w, :]), axis=(0, 1)),
        sup_err=sup_err, sup_err_quantiles=quant,
        events=event_stats([lg for _, lg in ensemble], T_events),
        N=N, stream_ids=[rec.stream_id for rec in recs],
    )


@dataclass
class MechanismStats:
    counts: list
    count_mean: float
    count_min: int
    count_max: int
    gap_min: float
    gap_mean: float
    gap_median: float
    dwell: float
    dwell_violations: int


@dataclass
class EventReport:
    T: float
    eso: MechanismStats
    ctrl: MechanismStats

    def to_dict(self):
        return {"T": self.T, "eso": asdict(self.eso), "ctrl": asdict(self.ctrl)}


def _mech_stats(logs, mech):
    counts, gaps, violations = [], [], 0
    for lg in logs:
        times = lg.times(mech)
        counts.append(int(times.size))
        gaps.append(np.diff(times))
        violations += lg.dwell_violations(mech)
    g = np.concatenate(gaps) if gaps else np.empty(0)
    nan = float("nan")
    return MechanismStats(
        counts=counts, count_mean=float(np.mean(counts)), count_min=int(min(counts)),
        count_max=int(max(counts)),
        gap_min=float(g.min()) if g.size else nan,
        gap_mean=float(g.mean()) if g.size else nan,
        gap_median=float(np.median(g)) if g.size else nan,
        dwell=float(logs[0].dwell(mech)), dwell_violations=violations,
    )


def event_stats(logs, T) -> EventReport:
    if not logs:
        raise DomainError("no event logs")
    return EventReport(T=float(T), eso=_mech_stats(logs, "eso"), ctrl=_mech_stats(logs, "ctrl"))


@dataclass
class ScalingPoint:
    r: float
    ok: bool
    error: str = ""
    window_mse: list = field(default_factory=list)
    window_mse_se: list = field(default_factory=list)
    window_state_ms: float = float("nan")
    sup_err_q90: list = field(default_factory=list)
    eso_count_mean: float = float("nan")
    ctrl_count_mean: float = float("nan")
    dwell_violations: int = 0


@dataclass
class ScalingReport:
    r_values: list
    N: int
    window_start: float
    points: list
    slopes: list                  # per error component, d log MSE / d log r
    verdicts: dict
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "kind": "scaling_report",
            "r_values": list(self.r_values),
            "N": self.N,
            "window_start": self.window_start,
            "points": [asdict(p) for p in self.points],
            "slopes": list(self.slopes),
            "verdicts": dict(self.verdicts),
            "warnings": list(self.warnings),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_curves(self, path):
        ok = [p for p in self.points if p.ok]
        n1 = len(ok[0].window_mse) if ok else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r"] + [f"mse{i}" for i in range(1, n1 + 1)]
                       + [f"mse{i}_se" for i in range(1, n1 + 1)] + ["state_ms"])
            for p in ok:
                w.writerow([repr(p.r)] + [repr(v) for v in p.window_mse]
                           + [repr(v) for v in p.window_mse_se] + [repr(p.window_state_ms)])


def _strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def loglog_slope(r_values, values) -> float:
    """Ordinary least-squares slope of log(values) against log(r)."""
    x = np.log(np.asarray(r_values, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def scaling_study(base_cfg, r_values, N, window_start=None, threads=None) -> ScalingReport:
    """Re-run the ensemble at each gain r and compare windowed error statistics.

    Dwell times, thresholds and the integration step follow r.  A divergent
    or invalid gain is recorded and the study moves on.
    """
    r_values = [float(r) for r in r_values]
    if len(r_values) < 2:
        raise DomainError("need at least two r values")
    if not _strictly_decreasing(r_values[::-1]):
        raise DomainError("r values must be strictly increasing")
    window_start = default_window_start(base_cfg.T) if window_start is None else window_start
    points = []
    for r in r_values:
        cfg = base_cfg.with_gain(r)
        report = validate_design(cfg.design, cfg.spec)
        if not report.passed:
            points.append(ScalingPoint(r=r, ok=False, error="design fails validation"))
            continue
        try:
            ens = run_ensemble(cfg, N, threads=threads)
        except (DivergenceError, PreconditionError) as exc:
            points.append(ScalingPoint(r=r, ok=False, error=str(exc)))
            continue
        s = mc_summary(ens, window_start, T=cfg.T)
        points.append(ScalingPoint(
            r=r, ok=True, window_mse=s.window_mse.tolist(), window_mse_se=s.window_mse_se.tolist(),
            window_state_ms=s.window_state_ms, sup_err_q90=s.sup_err_quantiles["q90"].tolist(),
            eso_count_mean=s.events.eso.count_mean, ctrl_count_mean=s.events.ctrl.count_mean,
            dwell_violations=s.events.eso.dwell_violations + s.events.ctrl.dwell_violations,
        ))
        del ens

    ok = [p for p in points if p.ok]
    verdicts, slopes = {}, []
    if len(ok) >= 2:
        rs = [p.r for p in ok]
        mse = np.array([p.window_mse for p in ok])      # (k, n+1)
        slopes = [loglog_slope(rs, mse[:, i]) for i in range(mse.shape[1])]
        for i in range(mse.shape[1]):
            verdicts[f"mse{i + 1}_decreasing"] = _strictly_decreasing(mse[:, i].tolist())
        last = mse[-1]
        verdicts["ordering_at_max_r"] = _strictly_decreasing(last[::-1].tolist())
        verdicts["state_ms_decreasing"] = _strictly_decreasing([p.window_state_ms for p in ok])
        sup = np.array([p.sup_err_q90 for p in ok])
        verdicts["sup_err_q90_decreasing"] = all(_strictly_decreasing(sup[:, i].tolist())
                                                 for i in range(sup.shape[1]))
        verdicts["all_points_ok"] = len(ok) == len(points)
    warnings_ = []
    if N < 2:
        warnings_.append("N=1: Monte Carlo averages are single-path values (high variance)")
    return ScalingReport(r_values=r_values, N=N, window_start=window_start, points=points,
                         slopes=slopes, verdicts=verdicts, warnings=warnings_)
