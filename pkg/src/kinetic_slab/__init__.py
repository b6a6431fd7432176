"""Kinetic transport toolkit for a slab-like domain with mixed wall physics.

The domain is a finite cylinder (or its 2-D rectangular analog) whose flat
caps reflect molecules specularly while the lateral wall re-emits them
diffusely at wall temperature.  The package provides the linearized
hard-sphere collision operator on a truncated velocity lattice, backward
stochastic trajectory tracing, a recursive Monte Carlo point estimator of the
perturbation field, a deterministic discrete-velocity solver, and the
diagnostics used to measure relaxation rates and conservation defects.

Submodules are imported lazily so that the command-line entry point can pin
BLAS thread counts before numpy is first loaded.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "geometry",
    "collision",
    "gamma",
    "boundary",
    "cycles",
    "duhamel_mc",
    "dvm_solver",
    "diagnostics",
    "config",
    "cli",
    "verify",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
