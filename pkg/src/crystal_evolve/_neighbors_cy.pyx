# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled periodic-image candidate scan.

Keep the floating-point expressions in step with ``_neighbors_py``: the
displacement is (x_j + offset) - x_i and the squared norm is accumulated
component-wise left to right, so both backends return bit-identical
distances (the extension is additionally built with -ffp-contract=off).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND_NAME = "cython"


def enumerate_candidates(cnp.ndarray[cnp.float64_t, ndim=2] cart,
                         cnp.ndarray[cnp.float64_t, ndim=2] lattice,
                         reps, double cutoff):
    """All periodic-image pairs within the cutoff; see the python twin."""
    cdef Py_ssize_t n = cart.shape[0]
    cdef int m0 = reps[0], m1 = reps[1], m2 = reps[2]
    cdef double l00 = lattice[0, 0], l01 = lattice[0, 1], l02 = lattice[0, 2]
    cdef double l10 = lattice[1, 0], l11 = lattice[1, 1], l12 = lattice[1, 2]
    cdef double l20 = lattice[2, 0], l21 = lattice[2, 1], l22 = lattice[2, 2]

    cdef int a0, a1, a2
    cdef Py_ssize_t i, j, count, pos
    cdef double ox, oy, oz, tx, ty, tz, dx, dy, dz, d2, d

    # first pass: count surviving pairs
    count = 0
    for a0 in range(-m0, m0 + 1):
        for a1 in range(-m1, m1 + 1):
            for a2 in range(-m2, m2 + 1):
                ox = a0 * l00 + a1 * l10 + a2 * l20
                oy = a0 * l01 + a1 * l11 + a2 * l21
                oz = a0 * l02 + a1 * l12 + a2 * l22
                for j in range(n):
                    tx = cart[j, 0] + ox
                    ty = cart[j, 1] + oy
                    tz = cart[j, 2] + oz
                    for i in range(n):
                        dx = tx - cart[i, 0]
                        dy = ty - cart[i, 1]
                        dz = tz - cart[i, 2]
                        d2 = dx * dx + dy * dy + dz * dz
                        if d2 > 0.0:
                            d = sqrt(d2)
                            if d <= cutoff:
                                count += 1

    cdef cnp.ndarray[cnp.int64_t, ndim=1] ii = np.empty(count, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] jj = np.empty(count, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] images = np.empty((count, 3), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dists = np.empty(count, dtype=np.float64)

    pos = 0
    for a0 in range(-m0, m0 + 1):
        for a1 in range(-m1, m1 + 1):
            for a2 in range(-m2, m2 + 1):
                ox = a0 * l00 + a1 * l10 + a2 * l20
                oy = a0 * l01 + a1 * l11 + a2 * l21
                oz = a0 * l02 + a1 * l12 + a2 * l22
                for j in range(n):
                    tx = cart[j, 0] + ox
                    ty = cart[j, 1] + oy
                    tz = cart[j, 2] + oz
                    for i in range(n):
                        dx = tx - cart[i, 0]
                        dy = ty - cart[i, 1]
                        dz = tz - cart[i, 2]
                        d2 = dx * dx + dy * dy + dz * dz
                        if d2 > 0.0:
                            d = sqrt(d2)
                            if d <= cutoff:
                                ii[pos] = i
                                jj[pos] = j
                                images[pos, 0] = a0
                                images[pos, 1] = a1
                                images[pos, 2] = a2
                                dists[pos] = d
                                pos += 1

    return ii, jj, images, dists
