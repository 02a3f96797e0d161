"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The only kernel is `piecewise_integrals`: exact time integrals of
piecewise-constant noise trajectories between consecutive boundary times.
It dominates the runtime of every Monte-Carlo protocol, so a Cython
implementation is used when the compiled extension is importable; a
vectorized numpy implementation is the fallback. Selection happens at
import and can be forced with QUADECHO_BACKEND=cython|numpy.

Trajectory layout (shared by both backends): segments are concatenated
into flat `knots`/`values` arrays indexed by `offsets` (CSR style). Within
segment s, v(t) = values[k] for knots[k] <= t < knots[k+1], v = values[-1]
after the last knot, and v = 0 before the first knot.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy as _numpy_backend

try:
    from . import _kernels as _cython_backend
except ImportError:  # extension not built; numpy fallback still works
    _cython_backend = None

_FORCED = os.environ.get("QUADECHO_BACKEND", "").strip().lower()
if _FORCED == "numpy":
    _ACTIVE = "numpy"
elif _FORCED == "cython":
    if _cython_backend is None:
        raise ImportError(
            "QUADECHO_BACKEND=cython requested but the compiled extension is "
            "not available; build it with `python setup.py build_ext --inplace`"
        )
    _ACTIVE = "cython"
else:
    _ACTIVE = "cython" if _cython_backend is not None else "numpy"


def active_backend() -> str:
    return _ACTIVE


def available_backends() -> tuple[str, ...]:
    return ("cython", "numpy") if _cython_backend is not None else ("numpy",)


def piecewise_integrals(
    knots: np.ndarray,
    values: np.ndarray,
    offsets: np.ndarray,
    boundaries: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    """Integrate each piecewise-constant segment between boundary times.

    Args:
        knots: flat float64 array, ascending within each segment.
        values: flat float64 array, same length; values[k] holds on
            [knots[k], knots[k+1]).
        offsets: intp array of length n_seg+1 slicing knots/values.
        boundaries: ascending float64 array of length K+1, >= 0.

    Returns:
        (n_seg, K) float64 array; entry (s, l) is the integral of segment s
        over [boundaries[l], boundaries[l+1]].
    """
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.intp)
    boundaries = np.ascontiguousarray(boundaries, dtype=np.float64)
    if knots.shape != values.shape:
        raise ValueError("knots and values must have identical shape")
    if boundaries.size < 2:
        raise ValueError("need at least two boundary times")
    name = backend or _ACTIVE
    if name == "cython":
        if _cython_backend is None:
            raise ValueError("cython backend not available")
        return _cython_backend.piecewise_integrals(knots, values, offsets, boundaries)
    if name == "numpy":
        return _numpy_backend.piecewise_integrals(knots, values, offsets, boundaries)
    raise ValueError(f"unknown backend {name!r}")
