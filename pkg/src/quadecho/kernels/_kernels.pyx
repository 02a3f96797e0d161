# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory-integration kernel.

Two-pointer walk over (knots, boundaries) per segment: O(K + B) with no
allocation in the inner loop. Semantics match kernels._numpy exactly.
"""

import numpy as np


def piecewise_integrals(
    const double[::1] knots,
    const double[::1] values,
    const Py_ssize_t[::1] offsets,
    const double[::1] boundaries,
):
    cdef Py_ssize_t n_seg = offsets.shape[0] - 1
    cdef Py_ssize_t nb = boundaries.shape[0]
    out = np.zeros((n_seg, nb - 1))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t s, l, kstart, kend, j, nxt_j
    cdef double a, b, t, nxt, v, acc

    for s in range(n_seg):
        kstart = offsets[s]
        kend = offsets[s + 1]
        # j indexes the piece active at the current time; kstart-1 means
        # "before the first knot" where the value is zero
        j = kstart - 1
        for l in range(nb - 1):
            a = boundaries[l]
            b = boundaries[l + 1]
            while j + 1 < kend and knots[j + 1] <= a:
                j += 1
            acc = 0.0
            t = a
            while True:
                if j + 1 < kend and knots[j + 1] < b:
                    nxt = knots[j + 1]
                else:
                    nxt = b
                v = 0.0 if j < kstart else values[j]
                acc += v * (nxt - t)
                if nxt >= b:
                    break
                t = nxt
                j += 1
            ov[s, l] = acc
    return out
