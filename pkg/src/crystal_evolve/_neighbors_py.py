"""Pure numpy implementation of the periodic-image candidate scan.

This mirrors the compiled kernel in ``_neighbors_cy`` operation for
operation: the displacement is computed as (x_j + offset) - x_i and the
squared norm is accumulated component-wise left to right, so both backends
produce bit-identical distances.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def enumerate_candidates(cart: np.ndarray, lattice: np.ndarray,
                         reps: tuple[int, int, int], cutoff: float):
    """All periodic-image pairs within the cutoff.

    Returns (ii, jj, images, distances) where the pair is atom i to the image
    of atom j translated by ``images`` cells; the exact zero-distance entries
    (the self image and coincident atoms) are excluded.
    """
    n = cart.shape[0]
    m0, m1, m2 = reps
    grid = np.stack(
        np.meshgrid(
            np.arange(-m0, m0 + 1),
            np.arange(-m1, m1 + 1),
            np.arange(-m2, m2 + 1),
            indexing="ij",
        ),
        axis=-1,
    ).reshape(-1, 3)

    offsets = (
        grid[:, 0:1] * lattice[0]
        + grid[:, 1:2] * lattice[1]
        + grid[:, 2:3] * lattice[2]
    )  # (M, 3)

    # shifted[m, j, :] = cart[j] + offsets[m]
    shifted = cart[None, :, :] + offsets[:, None, :]
    dx = shifted[:, None, :, 0] - cart[None, :, None, 0]
    dy = shifted[:, None, :, 1] - cart[None, :, None, 1]
    dz = shifted[:, None, :, 2] - cart[None, :, None, 2]
    d2 = dx * dx + dy * dy + dz * dz
    d = np.sqrt(d2)

    mask = (d2 > 0.0) & (d <= cutoff)
    m_idx, i_idx, j_idx = np.nonzero(mask)
    return (
        i_idx.astype(np.int64),
        j_idx.astype(np.int64),
        grid[m_idx].astype(np.int64),
        d[mask],
    )
