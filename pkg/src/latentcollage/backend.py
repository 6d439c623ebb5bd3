"""Selects the compute backend for the hot kernels.

Two interchangeable implementations exist: a pure-numpy one built on
im2col + BLAS, and a numba one built on JIT-compiled parallel loops.
The active backend is chosen by the ``LATENTCOLLAGE_BACKEND`` environment
variable ("numba" or "numpy"). When unset, the numpy path is used: on the
reference 2-core box BLAS beats the JIT loops on every training shape
(see benchmarks/bench_backends.py); flip the flag on wide machines.
``set_backend`` overrides the choice at runtime.
"""

from __future__ import annotations

import importlib
import os
import warnings

_VALID = ("numba", "numpy")
_active: str | None = None
_modules: dict = {}


def _numba_available() -> bool:
    try:
        importlib.import_module("numba")
        return True
    except ImportError:
        return False


def _resolve_default() -> str:
    env = os.environ.get("LATENTCOLLAGE_BACKEND", "").strip().lower()
    if env:
        if env not in _VALID:
            raise ValueError(
                f"LATENTCOLLAGE_BACKEND must be one of {_VALID}, got {env!r}"
            )
        if env == "numba" and not _numba_available():
            warnings.warn("numba requested but not importable; using numpy kernels")
            return "numpy"
        return env
    return "numpy"


def get_backend() -> str:
    global _active
    if _active is None:
        _active = _resolve_default()
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name


def kernels():
    """Return the kernel module for the active backend."""
    name = get_backend()
    mod = _modules.get(name)
    if mod is None:
        mod = importlib.import_module(f"latentcollage._kernels_{name}")
        _modules[name] = mod
    return mod
