"""Built-in experiment configurations."""

import copy
import math

PRESETS = {
    "z1-stable-05": {
        "name": "z1-stable-05",
        "space": {"kind": "lattice", "dim": 1, "side": 2049},
        "base": {"kind": "averaged"},
        "bernstein": {"kind": "stable", "alpha": 0.5},
        "walk_dimension": 2.0,
        "n_max": 128,
        "grids": {
            "times": list(range(1, 129)),
            "radii": [2 ** j for j in range(0, 11)],
            "centers": [[-128], [0], [128]],
            "d_max": 256,
            "harnack_R": [16, 32, 64],
            "exit_radii": [4, 8, 16, 32],
            "exit_window": 257,
        },
        "suites": ["weights", "tails", "potential", "dheat", "thm1", "exit", "harnack", "cs_probe",
                   "equivalence"],
        "C_max": 100.0,
        "seed": 0,
    },
    "z1-stable-15-check-fail-range": {
        "name": "z1-stable-15-check-fail-range",
        "space": {"kind": "lattice", "dim": 1, "side": 2049},
        "base": {"kind": "averaged"},
        "bernstein": {"kind": "stable", "alpha": 0.75},
        "walk_dimension": 2.0,
        "n_max": 128,
        "grids": {
            "times": list(range(1, 129)),
            "radii": [1, 2, 4, 8, 16, 32],
            "centers": [[-128], [0], [128]],
            "d_max": 256,
        },
        "suites": ["dheat", "equivalence"],
        "C_max": 100.0,
        "seed": 0,
    },
    "gasket-stable-07": {
        "name": "gasket-stable-07",
        "space": {"kind": "gasket", "level": 5},
        "base": {"kind": "srw"},
        "bernstein": {"kind": "stable", "alpha": 0.7},
        "walk_dimension": math.log(5) / math.log(2),
        "n_max": 32,
        "grids": {
            "times": list(range(1, 33)),
            "radii": [1, 2, 4, 8, 16],
            "centers": "anchor",
            "d_max": 15,
            "exit_radii": [2, 4, 8],
        },
        "suites": ["weights", "tails", "dheat", "exit"],
        "C_max": 100.0,
        "seed": 0,
    },
    "identity-sanity": {
        "name": "identity-sanity",
        "space": {"kind": "lattice", "dim": 1, "side": 1025},
        "base": {"kind": "averaged"},
        "bernstein": {"kind": "identity"},
        "walk_dimension": 2.0,
        "n_max": 64,
        "grids": {
            "times": list(range(1, 65)),
            "radii": [1, 2, 4, 8, 16],
            "centers": [[0]],
            "d_max": 32,
        },
        "suites": ["weights", "tails", "potential", "equivalence"],
        "C_max": 100.0,
        "seed": 0,
    },
}


def names():
    return sorted(PRESETS)


def get(name):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(names())}")
    return copy.deepcopy(PRESETS[name])
