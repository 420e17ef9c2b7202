"""Kernel backend selection.

The hot Monte Carlo reductions exist twice: a Cython extension
(``genselect._kernels._mc``) and a numpy fallback. The compiled backend
is used when importable; ``GENSELECT_KERNEL=numpy`` or
``GENSELECT_KERNEL=compiled`` forces a choice (the latter raises if the
extension was not built). Both backends share contracts and random
inputs, so swapping them does not change results.
"""

import os

from . import numpy_backend

try:
    from . import _mc as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"numpy": numpy_backend}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available_backends():
    """Names of importable kernel backends."""
    return tuple(sorted(_BACKENDS))


def get_backend(name):
    """Return the backend module for `name` ('numpy' or 'compiled')."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} not available; built: {available_backends()}"
        ) from None


def _select():
    requested = os.environ.get("GENSELECT_KERNEL", "").strip().lower()
    if requested:
        return get_backend(requested)
    return _compiled if _compiled is not None else numpy_backend


_active = _select()

BACKEND = _active.NAME
rowmax_mean_std = _active.rowmax_mean_std
rowargmax = _active.rowargmax
plurality_winners = _active.plurality_winners
cjt_correct_count = _active.cjt_correct_count

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "rowmax_mean_std",
    "rowargmax",
    "plurality_winners",
    "cjt_correct_count",
]
