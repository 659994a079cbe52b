"""Command-line entry point: validate, simulate, mc, sweep, report."""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .analysis import mc_summary, scaling_study
from .config import build_sim_config, read_config_source
from .errors import ConfigError, DivergenceError
from .gains import validate_design
from .simulator import run_ensemble, run_trajectory

log = logging.getLogger("etadrc")

OUT_DIR_ENV = "ETADRC_OUT_DIR"
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


class Manifest:
    def __init__(self, out_dir, command, args, resolved, source, validation):
        self.path = os.path.join(out_dir, "manifest.json")
        self.doc = {
            "tool": "etadrc",
            "version": __version__,
            "command": command,
            "args": args,
            "source": source,
            "config": resolved,
            "seeds": [resolved["sim"]["seed"]],
            "validation": {"passed": validation["passed"], "digest": _digest(validation)},
            "created": _now(),
            "status": "running",
            "outputs": {},
        }
        self.write()

    def write(self):
        with open(self.path, "w") as fh:
            json.dump(self.doc, fh, indent=2)
            fh.write("\n")

    def finish(self, status, **extra):
        self.doc.update(status=status, finished=_now(), **extra)
        self.write()


def _load(parser, args):
    try:
        resolved, manifest = read_config_source(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    recorded = manifest.get("args", {}) if manifest else {}
    for key, value in recorded.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    if getattr(args, "seed", None) is not None:
        resolved["sim"]["seed"] = int(args.seed)
    return resolved


def _out_dir(args):
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "etadrc-out"
    os.makedirs(out, exist_ok=True)
    return out


def _validated(resolved, force):
    cfg = build_sim_config(resolved)
    report = validate_design(cfg.design, cfg.spec)
    print(report.format())
    if not report.passed and not force:
        print("design fails validation (use --force to simulate anyway)", file=sys.stderr)
        return cfg, None
    return cfg, report


def cmd_validate(parser, args):
    resolved = _load(parser, args)
    cfg = build_sim_config(resolved)
    report = validate_design(cfg.design, cfg.spec)
    print(report.format())
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kind": "validation", **report.to_dict()}, fh, indent=2)
            fh.write("\n")
    return 0 if report.passed else EXIT_FAIL


def cmd_simulate(parser, args):
    resolved = _load(parser, args)
    cfg, report = _validated(resolved, args.force)
    if report is None:
        return EXIT_FAIL
    out = _out_dir(args)
    manifest = Manifest(out, "simulate", {"seed": resolved["sim"]["seed"], "force": bool(args.force)},
                        resolved, args.config, report.to_dict())
    try:
        rec, events = run_trajectory(cfg, force=args.force)
    except DivergenceError as exc:
        manifest.finish("diverged", blowup_time=exc.t)
        print(f"diverged at t={exc.t!r}", file=sys.stderr)
        return EXIT_DIVERGED
    paths = {"trajectory": os.path.join(out, "trajectory.csv"), "events": os.path.join(out, "events.jsonl")}
    rec.to_csv(paths["trajectory"])
    events.to_jsonl(paths["events"])
    manifest.finish("ok", outputs=paths,
                    event_counts={"eso": int(events.eso_times.size), "ctrl": int(events.ctrl_times.size)})
    print(f"eso events: {events.eso_times.size}  ctrl events: {events.ctrl_times.size}")
    print(f"wrote {paths['trajectory']}, {paths['events']}, {manifest.path}")
    return 0


def cmd_mc(parser, args):
    resolved = _load(parser, args)
    if args.mc is None:
        parser.error("mc requires --mc N")
    cfg, report = _validated(resolved, args.force)
    if report is None:
        return EXIT_FAIL
    out = _out_dir(args)
    margs = {"seed": resolved["sim"]["seed"], "mc": int(args.mc), "window": args.window, "force": bool(args.force)}
    manifest = Manifest(out, "mc", margs, resolved, args.config, report.to_dict())
    try:
        ens = run_ensemble(cfg, int(args.mc), threads=args.threads, force=args.force)
    except DivergenceError as exc:
        manifest.finish("diverged", blowup_time=exc.t, stream_id=exc.stream_id)
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGED
    summary = mc_summary(ens, args.window, T=cfg.T)
    paths = {"summary": os.path.join(out, "mc_summary.json"), "curves": os.path.join(out, "mc_curves.csv")}
    summary.write_json(paths["summary"])
    summary.write_curves(paths["curves"])
    manifest.finish("ok", outputs=paths)
    print(render_report(summary.to_dict()))
    return 0


def cmd_sweep(parser, args):
    resolved = _load(parser, args)
    if not args.r or len(args.r) < 2:
        parser.error("sweep needs at least two --r values")
    if args.mc is None:
        parser.error("sweep requires --mc N")
    cfg = build_sim_config(resolved)
    out = _out_dir(args)
    margs = {"seed": resolved["sim"]["seed"], "mc": int(args.mc), "r": [float(r) for r in args.r],
             "window": args.window}
    manifest = Manifest(out, "sweep", margs, resolved, args.config, validate_design(cfg.design, cfg.spec).to_dict())
    try:
        report = scaling_study(cfg, args.r, int(args.mc), window_start=args.window, threads=args.threads)
    except ValueError as exc:
        parser.error(str(exc))
    paths = {"report": os.path.join(out, "scaling_report.json"), "curves": os.path.join(out, "scaling_curves.csv")}
    report.write_json(paths["report"])
    report.write_curves(paths["curves"])
    ok = any(p.ok for p in report.points)
    manifest.finish("ok" if ok else "failed", outputs=paths)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(render_report(report.to_dict()))
    return 0 if ok else EXIT_FAIL


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_report(doc: dict) -> str:
    """Human-readable table for a scaling report, MC summary, validation report or manifest."""
    kind = doc.get("kind") or ("manifest" if doc.get("tool") == "etadrc" else None)
    lines = []
    if kind == "scaling_report":
        lines.append(f"scaling study: N={doc['N']} window_start={_fmt(doc['window_start'])}")
        n1 = max((len(p["window_mse"]) for p in doc["points"] if p["ok"]), default=0)
        head = ["r"] + [f"mse{i}" for i in range(1, n1 + 1)] + ["sum E|x|^2", "eso", "ctrl", "status"]
        lines.append("  ".join(f"{h:>11}" for h in head))
        for p in doc["points"]:
            if p["ok"]:
                row = [p["r"]] + p["window_mse"] + [p["window_state_ms"], p["eso_count_mean"], p["ctrl_count_mean"], "ok"]
            else:
                row = [p["r"]] + ["-"] * (n1 + 3) + ["FAILED: " + p["error"]]
            lines.append("  ".join(f"{_fmt(v):>11}" for v in row))
        if doc["slopes"]:
            lines.append("log-log slopes: " + ", ".join(_fmt(s) for s in doc["slopes"]))
        for k, v in doc["verdicts"].items():
            lines.append(f"  {k:<26} {'yes' if v else 'NO'}")
    elif kind == "mc_summary":
        lines.append(f"Monte Carlo summary: N={doc['N']} window_start={_fmt(doc['window_start'])}")
        lines.append("  window MSE: " + ", ".join(_fmt(v) for v in doc["window_mse"]))
        lines.append("  window E|x_i|: " + ", ".join(_fmt(v) for v in doc["window_abs_state"]))
        lines.append(f"  window sum E|x_i|^2: {_fmt(doc['window_state_ms'])}")
        for q, vals in doc["sup_err_quantiles"].items():
            lines.append(f"  sup error {q}: " + ", ".join(_fmt(v) for v in vals))
        for mech in ("eso", "ctrl"):
            e = doc["events"][mech]
            lines.append(f"  {mech:>4} events: mean={_fmt(e['count_mean'])} min={e['count_min']} max={e['count_max']}"
                         f" min gap={_fmt(e['gap_min'])} dwell violations={e['dwell_violations']}")
    elif kind == "validation":
        for c in doc["checks"]:
            lines.append(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']:<16} {_fmt(c['value'])} vs {_fmt(c['threshold'])}")
    elif kind == "manifest":
        lines.append(f"{doc['command']} run, status={doc['status']}, created={doc['created']}")
        lines.append(f"  config source: {doc['source']}  seeds: {doc['seeds']}")
        lines.append(f"  validation passed: {doc['validation']['passed']}")
        for k, v in doc.get("outputs", {}).items():
            lines.append(f"  {k}: {v}")
    else:
        raise ValueError("unrecognised report document")
    return "\n".join(lines)


def cmd_report(parser, args):
    try:
        with open(args.path) as fh:
            doc = json.load(fh)
        print(render_report(doc))
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot render {args.path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="etadrc", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="preset name, YAML config, or run manifest")

    sp = sub.add_parser("validate", help="check design conditions")
    common(sp)
    sp.add_argument("--json", help="also write the report as JSON")
    sp.set_defaults(func=cmd_validate)

    for name, func, helptext in (("simulate", cmd_simulate, "one trajectory to CSV + JSONL"),
                                 ("mc", cmd_mc, "ensemble summary")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir")
        sp.add_argument("--force", action="store_true", default=None)
        if name == "mc":
            sp.add_argument("--mc", type=int, help="ensemble size")
            sp.add_argument("--window", type=float, help="start of the measurement window")
            sp.add_argument("--threads", type=int, default=os.cpu_count())
        sp.set_defaults(func=func)

    sp = sub.add_parser("sweep", help="scaling study over r")
    common(sp)
    sp.add_argument("--r", type=float, nargs="+")
    sp.add_argument("--mc", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--window", type=float)
    sp.add_argument("--threads", type=int, default=os.cpu_count())
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="render a JSON report as a table")
    sp.add_argument("path")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    return args.func(sub, args)


if __name__ == "__main__":
    sys.exit(main())
