"""YAML experiment configs: preset resolution, strict schema, SimConfig construction.

A config is a mapping with an optional ``preset`` key and the sections
``system``, ``gains``, ``etm``, ``noise`` and ``sim``.  Values given in the
file override the preset field by field.  Unknown keys are errors.
A run manifest written by the CLI is also accepted; its ``config`` entry is
used verbatim.
"""

from __future__ import annotations

import copy
import json
import os

import yaml

from .errors import ConfigError
from .gains import DesignGains
from .presets import NOISES, PRESETS, SYSTEMS, preset
from .simulator import SimConfig

SCHEMA = {
    "system": {"name": str},
    "gains": {"lambdas": list, "cs": list, "r": float, "theta": float},
    "etm": {"eps1": float, "kappa1": float, "eps2": float, "kappa2": float},
    "noise": {"psi": str, "alpha5": float, "rho1": float, "rho2": float, "w2_0": float, "enabled": bool},
    "sim": {"x0": list, "xhat0": list, "T": float, "h": float, "record_stride": int, "seed": int,
            "stream_id": int, "check_assumptions": bool},
}
NULLABLE = {("noise", "alpha5"), ("sim", "record_stride")}


def _coerce(section, key, kind, value):
    where = f"{section}.{key}"
    if value is None:
        if (section, key) in NULLABLE:
            return None
        raise ConfigError(f"{where}: value is required")
    try:
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)  # PyYAML reads 1e-4 as a string
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is list:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}") from None
    raise AssertionError(kind)


def validate_config(raw: dict) -> dict:
    """Merge onto the named preset (default paper-sec5) and check every key."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = copy.deepcopy(raw)
    base_name = raw.pop("preset", "paper-sec5")
    if base_name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {base_name!r}; choose from {sorted(PRESETS)}")
    resolved = preset(base_name)
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}; allowed: {sorted(SCHEMA)}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key; allowed: {sorted(SCHEMA[section])}")
            resolved[section][key] = value
    for section, keys in SCHEMA.items():
        for key, kind in keys.items():
            resolved[section][key] = _coerce(section, key, kind, resolved[section].get(key))
    if resolved["system"]["name"] not in SYSTEMS:
        raise ConfigError(f"system.name: unknown system {resolved['system']['name']!r}; "
                          f"choose from {sorted(SYSTEMS)}")
    if resolved["noise"]["psi"] not in NOISES:
        raise ConfigError(f"noise.psi: unknown noise {resolved['noise']['psi']!r}; choose from {sorted(NOISES)}")
    resolved["preset"] = base_name
    return resolved


def build_sim_config(resolved: dict) -> SimConfig:
    g, e, nz, s = resolved["gains"], resolved["etm"], resolved["noise"], resolved["sim"]
    spec = SYSTEMS[resolved["system"]["name"]]()
    noise = NOISES[nz["psi"]]()
    if nz["alpha5"] is not None:
        noise = type(noise)(noise.psi, nz["alpha5"], noise.name)
    try:
        design = DesignGains(lambdas=g["lambdas"], cs=g["cs"], r=g["r"], theta=g["theta"], **e)
        return SimConfig(
            spec=spec, design=design, noise=noise, rho1=nz["rho1"], rho2=nz["rho2"], w2_0=nz["w2_0"],
            noise_enabled=nz["enabled"], x0=s["x0"], xhat0=s["xhat0"], T=s["T"], h=s["h"],
            record_stride=s["record_stride"], seed=s["seed"], stream_id=s["stream_id"],
            check_assumptions=s["check_assumptions"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_config_source(source: str):
    """Return (resolved config, manifest-or-None) for a preset name, YAML file or manifest JSON."""
    if source in PRESETS and not os.path.exists(source):
        return validate_config({"preset": source}), None
    if not os.path.exists(source):
        raise ConfigError(f"{source}: no such file or preset")
    with open(source) as fh:
        text = fh.read()
    if source.endswith(".json"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if isinstance(doc, dict) and "config" in doc and "tool" in doc:
            cfg = dict(doc["config"])
            return validate_config(cfg), doc
        return validate_config(doc), None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{mark.line + 1}:{mark.column + 1}" if mark else "?"
        raise ConfigError(f"{source}:{loc}: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        doc = {}
    try:
        return validate_config(doc), None
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
