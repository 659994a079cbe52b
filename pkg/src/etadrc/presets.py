"""Named systems, bounded noises and full experiment presets.

Config files refer to systems and noises by catalog name; the presets are
complete config dictionaries in the same schema the loader accepts.
"""

from __future__ import annotations

import copy
import math

import numpy as np

from .noise import BoundedNoiseSpec
from .plant import SystemSpec


def _zero(x):
    return np.zeros_like(np.asarray(x[0], dtype=float))


def _paper_f(t, x, w1, w2):
    return x[0] + 2 * x[1] + np.sin(t) + np.cos(x[0] + x[1]) + w1 ** 3 + w2


def paper_sec5_system() -> SystemSpec:
    # |f| + |f_t| <= 3 + sqrt(5)||x|| + |w2| + |w1|^3; sum |f_x| + |f_w1| + |f_w1w1| + |f_w2| + |f_w2w2|
    # <= 6 + 3 w1^2 + 6|w1|
    return SystemSpec(
        n=2,
        f=_paper_f,
        g=(lambda x: np.sin(x[0]), lambda x: np.sin(x[0] + x[1])),
        L=(1.0, 1.0),
        alphas=(3.0, math.sqrt(5.0), 1.0, 6.0),
        phi1=lambda w: np.abs(w) ** 3,
        name="paper-sec5",
    )


def linear_n2_system() -> SystemSpec:
    """f = x1 + 2 x2 + w2, g = 0: linear chain driven by the colored noise."""
    return SystemSpec(
        n=2,
        f=lambda t, x, w1, w2: x[0] + 2 * x[1] + w2,
        g=(_zero, _zero),
        L=(0.0, 0.0),
        alphas=(0.0, math.sqrt(5.0), 1.0, 3.0),
        name="linear-n2",
    )


def linear_n2_noiseless_system() -> SystemSpec:
    return SystemSpec(
        n=2,
        f=lambda t, x, w1, w2: x[0] + 2 * x[1],
        g=(_zero, _zero),
        L=(0.0, 0.0),
        alphas=(0.0, math.sqrt(5.0), 0.0, 3.0),
        name="linear-n2-noiseless",
    )


def silent_system(n: int = 2) -> SystemSpec:
    return SystemSpec(
        n=n,
        f=lambda t, x, w1, w2: _zero(x),
        g=tuple(_zero for _ in range(n)),
        L=(0.0,) * n,
        name="silent",
    )


SYSTEMS = {
    "paper-sec5": paper_sec5_system,
    "linear-n2": linear_n2_system,
    "linear-n2-noiseless": linear_n2_noiseless_system,
    "silent": silent_system,
}

# alpha5 bounds |psi| + |psi_t| + |psi_b| + |psi_bb|/2; for 2 sin(t + b) that is 3|sin| + 4|cos| <= 5.
NOISES = {
    "2sin(t+B1)": lambda: BoundedNoiseSpec(lambda t, b: 2.0 * np.sin(t + b), 5.0, "2sin(t+B1)"),
    "sin(t+B1)": lambda: BoundedNoiseSpec(lambda t, b: np.sin(t + b), 2.5, "sin(t+B1)"),
    "cos(t+B1)": lambda: BoundedNoiseSpec(lambda t, b: np.cos(t + b), 2.5, "cos(t+B1)"),
    "zero": lambda: BoundedNoiseSpec(lambda t, b: np.zeros_like(np.asarray(b, dtype=float)), 1.0, "zero"),
}


_PAPER = {
    "system": {"name": "paper-sec5"},
    "gains": {"lambdas": [6.0, 12.0, 8.0], "cs": [-1.0, -2.0], "r": 50.0, "theta": 7.0},
    "etm": {"eps1": 1.0, "kappa1": 1.0, "eps2": 1.0, "kappa2": 1.0},
    "noise": {"psi": "2sin(t+B1)", "alpha5": None, "rho1": 1.5, "rho2": 1.5, "w2_0": 0.0, "enabled": True},
    "sim": {"x0": [0.5, -0.5], "xhat0": [0.0, 0.0, 0.0], "T": 20.0, "h": 1e-4,
            "record_stride": 10, "seed": 0, "stream_id": 0, "check_assumptions": False},
}

PRESETS = {
    "paper-sec5": _PAPER,
    "linear-n2": {
        **_PAPER,
        "system": {"name": "linear-n2"},
        "sim": {**_PAPER["sim"], "T": 10.0, "record_stride": 100},
    },
    "silent": {
        **_PAPER,
        "system": {"name": "silent"},
        "noise": {**_PAPER["noise"], "psi": "zero", "enabled": False},
        "sim": {**_PAPER["sim"], "x0": [0.0, 0.0], "xhat0": [0.0, 0.0, 0.0], "T": 1.0},
    },
}


def preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
