"""Periodic neighbor lists via a bounded supercell scan.

For every atom the nearest periodic images of all atoms (including images of
itself, never the zero-distance self image) within the cutoff are collected,
capped at ``max_neighbors`` per atom with ties broken by (neighbor index,
image) lexicographic order, and the selection is closed under edge reversal
so that (i, j, image) always appears together with (j, i, -image).

The image scan is the hot kernel of candidate evaluation.  A compiled Cython
implementation is used when available; ``CRYSTAL_EVOLVE_PURE_PYTHON=1`` forces
the numpy fallback.  Both produce bit-identical output.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import geometry
from .structures import CrystalStructure

if os.environ.get("CRYSTAL_EVOLVE_PURE_PYTHON", "") not in ("", "0"):
    from . import _neighbors_py as _kernel
else:
    try:
        from . import _neighbors_cy as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _neighbors_py as _kernel

BACKEND = _kernel.BACKEND_NAME


def supercell_reps(lattice: np.ndarray, cutoff: float) -> tuple[int, int, int]:
    """Scan bounds per axis: any image within the cutoff of an atom in the
    home cell lies within floor(cutoff / width) + 1 translations."""
    widths = geometry.perpendicular_widths(lattice)
    return tuple(int(math.floor(cutoff / w)) + 1 for w in widths)


def _select_and_symmetrize(ii, jj, images, dists, n_atoms: int, max_neighbors: int):
    # nearest-first per atom, ties by (j, image) ascending
    order = np.lexsort((images[:, 2], images[:, 1], images[:, 0], jj, dists, ii))
    ii, jj, images, dists = ii[order], jj[order], images[order], dists[order]

    counts = np.bincount(ii, minlength=n_atoms)
    starts = np.concatenate(([0], np.cumsum(counts)))
    rank = np.arange(len(ii)) - starts[ii]
    keep = rank < max_neighbors
    ii, jj, images, dists = ii[keep], jj[keep], images[keep], dists[keep]

    # close under reversal; encode (i, j, image) as one integer for membership
    max_rep = int(np.max(np.abs(images))) if len(images) else 0
    base = 2 * max_rep + 3
    shift = max_rep + 1

    def encode(a, b, img):
        code = a * n_atoms + b
        for k in range(3):
            code = code * base + (img[:, k] + shift)
        return code

    fwd = encode(ii, jj, images)
    rev = encode(jj, ii, -images)
    missing = ~np.isin(rev, fwd)

    src = np.concatenate([ii, jj[missing]])
    dst = np.concatenate([jj, ii[missing]])
    img = np.concatenate([images, -images[missing]])
    dd = np.concatenate([dists, dists[missing]])

    final = np.lexsort((img[:, 2], img[:, 1], img[:, 0], dst, src))
    return src[final], dst[final], img[final], dd[final]


def neighbor_list(structure: CrystalStructure, cutoff: float, max_neighbors: int):
    """Edges (src, dst, images, distances) for a structure.

    Isolated atoms simply contribute no edges; graph construction rejects
    such structures downstream.
    """
    lattice = structure.lattice()
    cart = np.ascontiguousarray(geometry.frac_to_cart(lattice, structure.frac_coords()))
    reps = supercell_reps(lattice, cutoff)
    ii, jj, images, dists = _kernel.enumerate_candidates(
        cart, np.ascontiguousarray(lattice), reps, float(cutoff)
    )
    return _select_and_symmetrize(ii, jj, images, dists, len(structure.sites), max_neighbors)
