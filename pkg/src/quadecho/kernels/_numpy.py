"""Pure-numpy fallback for the trajectory-integration kernel.

Strategy: build the cumulative integral F at every knot with one global
cumsum, then evaluate F at all (segment, boundary) pairs with a single
searchsorted over segment-shifted knot times. Integrals are differences of
consecutive F evaluations, so re-slicing an interval telescopes exactly up
to float rounding.
"""

from __future__ import annotations

import numpy as np


def piecewise_integrals(
    knots: np.ndarray,
    values: np.ndarray,
    offsets: np.ndarray,
    boundaries: np.ndarray,
) -> np.ndarray:
    n_seg = offsets.size - 1
    nb = boundaries.size
    if knots.size == 0:
        return np.zeros((n_seg, nb - 1))

    counts = np.diff(offsets)
    seg_of_knot = np.repeat(np.arange(n_seg), counts)

    # piece widths; each segment's last knot extends to +inf but its width
    # contribution is accounted for at evaluation time via values[pos]
    dt = np.zeros_like(knots)
    dt[:-1] = knots[1:] - knots[:-1]
    dt[offsets[1:] - 1] = 0.0

    cum = np.concatenate(([0.0], np.cumsum(values * dt)[:-1]))
    seg_base = cum[offsets[:-1]]          # cumulative at each segment start
    f_at_knot = cum - seg_base[seg_of_knot]

    # one global searchsorted: shift each segment into its own time window
    span = float(max(knots.max() if knots.size else 0.0, boundaries[-1])) + 1.0
    shifted = knots + span * seg_of_knot
    queries = boundaries[None, :] + span * np.arange(n_seg)[:, None]
    pos = np.searchsorted(shifted, queries.ravel(), side="right") - 1

    seg_of_query = np.repeat(np.arange(n_seg), nb)
    inside = pos >= offsets[seg_of_query]          # False: before first knot
    pos_safe = np.where(inside, pos, 0)
    f_b = np.where(
        inside,
        f_at_knot[pos_safe]
        + values[pos_safe] * (np.tile(boundaries, n_seg) - knots[pos_safe]),
        0.0,
    ).reshape(n_seg, nb)
    return f_b[:, 1:] - f_b[:, :-1]
