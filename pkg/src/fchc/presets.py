"""Ready-made configurations.

``example1_log``
    logarithmic potential, Neumann A and B, ``2 sigma = 1``, ``r = 0.5``;
    initial datum well inside ``(-1, 1)`` so the trajectory stays separated
    from the singular points.
``example2_regular``
    regular quartic potential with ``sigma = 0.8``.
``example3_growth``
    regular potential, Dirichlet B with ``sigma = 0.55``, Neumann A.
``constant_steady``
    ``y0 = 1`` with the regular potential and no control: a fixed point.
"""

from __future__ import annotations

import copy

import numpy as np

from .config import ExperimentConfig, config_from_dict

_BASE = {
    "domain": {"side_lengths": [2 * np.pi], "grid_points": [64]},
    "time": {"horizon": 1.0, "steps": 128},
    "state": {"tau": 1.0},
    "y0": {"kind": "modes", "offset": 0.1, "terms": [[2, 0.2], [3, -0.15], [5, 0.05]]},
    "control": {"kind": "modes", "terms": [[2, 0.3]]},
    "cost": {
        "alpha1": 1.0,
        "alpha2": 1.0,
        "alpha3": 0.1,
        "y_omega": {"kind": "modes", "offset": 0.1, "terms": [[2, -0.2]]},
        "y_q": {"kind": "constant", "value": 0.1},
    },
}

PRESETS = {
    "example1_log": {
        "operators": {"A": {"bc": "neumann", "r": 0.5}, "B": {"bc": "neumann", "sigma": 0.5}},
        "potential": {"kind": "logarithmic", "c1": 1.5, "delta": 1e-4},
    },
    "example2_regular": {
        "operators": {"A": {"bc": "neumann", "r": 0.5}, "B": {"bc": "neumann", "sigma": 0.8}},
        "potential": {"kind": "regular"},
    },
    "example3_growth": {
        "operators": {"A": {"bc": "neumann", "r": 0.5}, "B": {"bc": "dirichlet", "sigma": 0.55}},
        "potential": {"kind": "regular"},
    },
    "constant_steady": {
        "operators": {"A": {"bc": "neumann", "r": 0.5}, "B": {"bc": "neumann", "sigma": 0.8}},
        "potential": {"kind": "regular"},
        "y0": {"kind": "constant", "value": 1.0},
        "control": {"kind": "zero"},
    },
}


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = copy.deepcopy(_BASE)
    for key, value in PRESETS[name].items():
        data[key] = copy.deepcopy(value)
    return data


def load_preset(name: str, overrides=()) -> ExperimentConfig:
    return config_from_dict(preset_dict(name), overrides=overrides)
