"""Numerical laboratory for semilinear elliptic problems with boundary-
degenerate absorption: rate-function classification, closed-form oracles,
a monotone finite-difference solver, energy audits, dyadic cascades and an
experiment CLI.

Submodules are imported lazily so the CLI can pin thread counts before the
numeric stack loads.
"""
from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = ("omega", "dini", "oracles", "grids", "solver", "energy",
               "cascade", "reporting", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
