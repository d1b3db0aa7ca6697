"""Benchmark presets: architectures, point counts, and iteration budgets.

``paper`` mode reproduces each benchmark's published parameter table
verbatim.  ``desk`` mode keeps the architectures and point counts but caps
iterations so the whole comparison suite fits on a laptop CPU.

Per-network training-point rows in the source tables are aggregates
(interior-in-subdomain + shared boundary + shared interface); the resolved
interior split per subdomain is recorded here and echoed into every run
manifest.
"""

from __future__ import annotations

from .networks import FcnArch, IaArch
from .training import LossWeights, TrainConfig

PRESET_MODES = ("paper", "desk")
METHODS = ("ae", "pinn", "mpinn", "ipinn")


class PresetError(ValueError):
    pass


def _fcn(dim, width, hidden, act):
    return FcnArch(dim, width, hidden, act).to_config()


def _ia(dim, width, modules, act):
    return IaArch(dim, width, modules, act).to_config()


# problem -> counts and per-method architecture/iteration rows
_TABLES = {
    "ex1": {
        "dim": 1,
        "interior": (50, 50),
        "boundary": 2,
        "interface": (1,),
        "iterations": {"paper": 20000, "desk": 20000},
        "methods": {
            "pinn": lambda d: {"net": _fcn(d, 8, 3, "tanh")},
            "ipinn": lambda d: {"subnets": [_fcn(d, 8, 3, "sin"), _fcn(d, 8, 3, "cos")]},
            "mpinn": lambda d: {"subnets": [_fcn(d, 8, 3, "sin"), _fcn(d, 8, 3, "cos")]},
            "ae": lambda d: {
                "continuous": _fcn(d, 16, 3, "tanh"),
                "pieces": [_ia(d, 8, 1, "sin"), _ia(d, 8, 1, "cos")],
            },
        },
    },
    "ex2": {
        "dim": 2,
        "interior": (200, 300),
        "boundary": 400,
        "interface": (120,),
        "iterations": {"paper": 50000, "desk": 20000},
        "methods": {
            "pinn": lambda d: {"net": _fcn(d, 16, 3, "tanh")},
            "ipinn": lambda d: {"subnets": [_fcn(d, 16, 3, "sin"), _fcn(d, 16, 3, "tanh")]},
            "mpinn": lambda d: {"subnets": [_fcn(d, 16, 3, "sin"), _fcn(d, 16, 3, "tanh")]},
            "ae": lambda d: {
                "continuous": _fcn(d, 16, 3, "tanh"),
                "pieces": [_ia(d, 16, 2, "cos"), _ia(d, 16, 2, "sin")],
            },
        },
    },
    "ex3": {
        "dim": 2,
        "interior": (113, 387),
        "boundary": 400,
        "interface": (600,),
        "iterations": {"paper": 100000, "desk": 30000},
        "methods": {
            "pinn": lambda d: {"net": _fcn(d, 48, 3, "tanh")},
            "ipinn": lambda d: {"subnets": [_fcn(d, 48, 3, "cos"), _fcn(d, 48, 3, "sin")]},
            "mpinn": lambda d: {"subnets": [_fcn(d, 48, 3, "cos"), _fcn(d, 48, 3, "sin")]},
            "ae": lambda d: {
                "continuous": _fcn(d, 20, 3, "tanh"),
                "pieces": [_ia(d, 48, 2, "sin"), _ia(d, 48, 2, "cos")],
            },
        },
    },
    "ex4": {
        "dim": 3,
        "interior": (220, 280),
        "boundary": 600,
        "interface": (400,),
        "iterations": {"paper": 100000, "desk": 30000},
        "methods": {
            "ipinn": lambda d: {"subnets": [_fcn(d, 32, 3, "sin"), _fcn(d, 32, 3, "cos")]},
            "mpinn": lambda d: {"subnets": [_fcn(d, 32, 3, "sin"), _fcn(d, 32, 3, "cos")]},
            "ae": lambda d: {
                "continuous": _fcn(d, 20, 3, "tanh"),
                "pieces": [_ia(d, 32, 2, "sin"), _ia(d, 32, 2, "cos")],
            },
        },
    },
    "ex5": {
        "dim": 3,
        "interior": (100, 100, 100, 700),
        "boundary": 600,
        "interface": (400, 400, 400),
        "iterations": {"paper": 50000, "desk": 20000},
        "methods": {
            # the published subnet widths are 32/32/16/16; weight sharing
            # needs one shape, so the shared net uses the larger width
            "ipinn": lambda d: {
                "subnets": [
                    _fcn(d, 32, 3, "sigmoid"),
                    _fcn(d, 32, 3, "sin"),
                    _fcn(d, 32, 3, "cos"),
                    _fcn(d, 32, 3, "tanh"),
                ]
            },
            "mpinn": lambda d: {
                "subnets": [
                    _fcn(d, 32, 3, "sigmoid"),
                    _fcn(d, 32, 3, "sin"),
                    _fcn(d, 16, 3, "cos"),
                    _fcn(d, 16, 3, "tanh"),
                ]
            },
            "ae": lambda d: {
                "continuous": _fcn(d, 16, 3, "tanh"),
                "pieces": [
                    _ia(d, 32, 1, "cos"),
                    _ia(d, 32, 1, "cos"),
                    _ia(d, 16, 1, "cos"),
                    _ia(d, 16, 1, "sin"),
                ],
            },
        },
    },
}


def baseline_methods(problem):
    """The reference methods with a table row for this problem."""
    name = problem.split(":")[0]
    return tuple(m for m in ("pinn", "ipinn", "mpinn") if m in _TABLES[name]["methods"])


def preset(problem, method, mode="paper", seed=1234, iterations=None):
    """TrainConfig for a (problem, method) pair from the benchmark tables."""
    name = problem.split(":")[0]
    if mode not in PRESET_MODES:
        raise PresetError(f"unknown preset mode {mode!r}; valid: {PRESET_MODES}")
    try:
        table = _TABLES[name]
    except KeyError:
        raise PresetError(f"no preset table for problem {problem!r}") from None
    try:
        arch = table["methods"][method](table["dim"])
    except KeyError:
        raise PresetError(
            f"no {method!r} row in the {name} table; available: "
            f"{', '.join(sorted(table['methods']))}"
        ) from None
    return TrainConfig(
        problem=problem,
        method=method,
        iterations=iterations or table["iterations"][mode],
        architectures=arch,
        interior=table["interior"],
        boundary=table["boundary"],
        interface=table["interface"],
        seed=seed,
        weights=LossWeights(),
    )


def gradcheck_config(problem, method, seed=1234):
    """Small-architecture config for finite-difference gradient checks."""
    name = problem.split(":")[0]
    table = _TABLES[name]
    d = table["dim"]
    n_sub = len(table["interior"])
    n_ifc = len(table["interface"])
    small = {
        "pinn": {"net": _fcn(d, 8, 2, "tanh")},
        "ipinn": {
            "subnets": [_fcn(d, 8, 2, ("sin", "cos", "tanh", "sigmoid")[i % 4]) for i in range(n_sub)]
        },
        "mpinn": {
            "subnets": [_fcn(d, 8, 2, ("sin", "cos", "tanh", "sigmoid")[i % 4]) for i in range(n_sub)]
        },
        "ae": {
            "continuous": _fcn(d, 8, 2, "tanh"),
            "pieces": [_ia(d, 8, 1, ("sin", "cos")[i % 2]) for i in range(n_sub)],
        },
    }[method]
    return TrainConfig(
        problem=problem,
        method=method,
        iterations=1,
        architectures=small,
        interior=tuple(4 for _ in range(n_sub)),
        boundary=2 * d,
        interface=tuple(3 for _ in range(n_ifc)),
        seed=seed,
        weights=LossWeights(),
    )
