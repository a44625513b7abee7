"""Kernel backend selection.

The hot training loops exist twice: a compiled Cython extension
(``_cykernels``) and a pure-numpy fallback (``pyref``) with identical
call signatures.  The compiled backend is preferred when importable;
``TILEFIT_BACKEND=python`` or ``=cython`` forces a choice.  Both are kept
importable side by side so tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

from . import pyref
from .pyref import ACT_RELU, ACT_SINE, layer_offsets, param_count

try:
    from . import _cykernels
except ImportError:  # pragma: no cover - depends on the build
    _cykernels = None

_BACKENDS = {"python": pyref}
if _cykernels is not None:
    _BACKENDS["cython"] = _cykernels


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend_name() -> str:
    forced = os.environ.get("TILEFIT_BACKEND")
    if forced is not None:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"TILEFIT_BACKEND={forced!r} is not available; "
                f"built backends: {', '.join(available_backends())}"
            )
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


def get_backend(name=None):
    """Resolve a backend module from a name, module, or None (default)."""
    if name is None:
        return _BACKENDS[default_backend_name()]
    if isinstance(name, str):
        try:
            return _BACKENDS[name]
        except KeyError:
            raise RuntimeError(
                f"unknown kernel backend {name!r}; "
                f"built backends: {', '.join(available_backends())}"
            ) from None
    return name


__all__ = [
    "ACT_RELU",
    "ACT_SINE",
    "available_backends",
    "default_backend_name",
    "get_backend",
    "layer_offsets",
    "param_count",
    "pyref",
]
