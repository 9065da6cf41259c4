"""Lattice construction and fractional/Cartesian conversions.

A lattice is a row-major 3x3 matrix in Angstrom whose rows are the cell
vectors.  The conventional orientation is used throughout: the first cell
vector lies along x, the second in the x-y plane, and the third completes a
right-handed (positive determinant) basis.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateCellError

# cos(90 deg) evaluates to ~6e-17 through radians(); snap values this close
# to zero so right angles produce exactly orthogonal cell vectors.
_TRIG_SNAP = 1e-14


def _cos_deg(angle: float) -> float:
    c = math.cos(math.radians(angle))
    return 0.0 if abs(c) < _TRIG_SNAP else c


def _sin_deg(angle: float) -> float:
    s = math.sin(math.radians(angle))
    return 0.0 if abs(s) < _TRIG_SNAP else s


def volume_factor(alpha: float, beta: float, gamma: float) -> float:
    """The squared ratio (V / abc)^2 = 1 - ca^2 - cb^2 - cg^2 + 2 ca cb cg."""
    ca, cb, cg = _cos_deg(alpha), _cos_deg(beta), _cos_deg(gamma)
    return 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg


def cell_volume(a: float, b: float, c: float,
                alpha: float, beta: float, gamma: float) -> float:
    """Triple-product cell volume; raises DegenerateCellError when the angle
    combination is not geometrically realizable."""
    t = volume_factor(alpha, beta, gamma)
    if t <= 0.0:
        raise DegenerateCellError(
            f"angles ({alpha}, {beta}, {gamma}) give non-positive volume factor {t:.3e}"
        )
    return a * b * c * math.sqrt(t)


def lattice_from_params(a: float, b: float, c: float,
                        alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Row-major cell matrix for the given lengths (Angstrom) and angles (degrees)."""
    t = volume_factor(alpha, beta, gamma)
    if t <= 0.0:
        raise DegenerateCellError(
            f"angles ({alpha}, {beta}, {gamma}) give non-positive volume factor {t:.3e}"
        )
    ca, cb, cg = _cos_deg(alpha), _cos_deg(beta), _cos_deg(gamma)
    sg = _sin_deg(gamma)
    cy = (ca - cb * cg) / sg
    cz = math.sqrt(t) / sg
    return np.array([
        [a, 0.0, 0.0],
        [b * cg, b * sg, 0.0],
        [c * cb, c * cy, c * cz],
    ])


def lattice_params(lattice: np.ndarray) -> tuple[float, float, float, float, float, float]:
    """Recover (a, b, c, alpha, beta, gamma) from a cell matrix."""
    rows = np.asarray(lattice, dtype=float)
    a, b, c = (float(np.linalg.norm(rows[i])) for i in range(3))

    def angle(u, v):
        cosv = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        return math.degrees(math.acos(max(-1.0, min(1.0, cosv))))

    alpha = angle(rows[1], rows[2])
    beta = angle(rows[0], rows[2])
    gamma = angle(rows[0], rows[1])
    return a, b, c, alpha, beta, gamma


def frac_to_cart(lattice: np.ndarray, frac: np.ndarray) -> np.ndarray:
    """Row vector (or stack of row vectors) of fractional coordinates times the
    cell matrix."""
    return np.asarray(frac, dtype=float) @ lattice


def cart_to_frac(lattice: np.ndarray, cart: np.ndarray) -> np.ndarray:
    return np.asarray(cart, dtype=float) @ np.linalg.inv(lattice)


def perpendicular_widths(lattice: np.ndarray) -> np.ndarray:
    """Distance between opposite cell faces along each axis: V / |b x c| etc.

    These widths bound how many lattice translations can bring an image within
    a given cutoff distance.
    """
    vol = abs(float(np.linalg.det(lattice)))
    widths = np.empty(3)
    for k in range(3):
        u, v = lattice[(k + 1) % 3], lattice[(k + 2) % 3]
        widths[k] = vol / np.linalg.norm(np.cross(u, v))
    return widths


def wrap_frac(x):
    """Wrap fractional coordinates into [0, 1).

    Python's modulo can round values like -1e-20 % 1.0 up to exactly 1.0, so
    the result is post-corrected to keep the half-open interval.
    """
    wrapped = np.asarray(x, dtype=float) % 1.0
    wrapped = np.where(wrapped >= 1.0, 0.0, wrapped)
    if np.ndim(x) == 0:
        return float(wrapped)
    return wrapped
