"""Kernel backend selection: compiled logistic core with numpy fallback.

The Newton iteration is the one per-replication loop that pays for
compilation; the stacked-moment kernels (phi_stack, influence_corrections)
are BLAS-bound and always run through numpy (the benchmark in
``benchmarks/bench_kernels.py`` documents the measurement). The compiled
core is used when built, unless ``FACTORIPW_PURE_PYTHON=1``; ``use()``
switches at runtime for tests and benchmarks.
"""

import os

from . import _kernels_py
from ._kernels_py import influence_corrections, phi_stack  # noqa: F401

NEWTON_CONVERGED = _kernels_py.NEWTON_CONVERGED
NEWTON_MAX_ITER = _kernels_py.NEWTON_MAX_ITER
NEWTON_DIVERGED = _kernels_py.NEWTON_DIVERGED
NEWTON_SINGULAR = _kernels_py.NEWTON_SINGULAR

_impls = {"python": _kernels_py}
try:
    from . import _core  # compiled at install time; optional
    _impls["cython"] = _core
except ImportError:
    _core = None

if os.environ.get("FACTORIPW_PURE_PYTHON", "") not in ("", "0"):
    _active = "python"
else:
    _active = "cython" if "cython" in _impls else "python"


def available_backends():
    return tuple(sorted(_impls))


def active_backend():
    return _active


def use(name):
    """Select the kernel backend by name ('python' or 'cython')."""
    global _active
    if name not in _impls:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = name


def logistic_newton(*args, **kwargs):
    return _impls[_active].logistic_newton(*args, **kwargs)
