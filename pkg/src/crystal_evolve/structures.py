"""Crystal structure records: the unit of storage, mutation, and serialization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import elements, geometry
from .errors import InvalidStructureError


@dataclass(frozen=True)
class AtomSite:
    """One atom: element symbol plus fractional coordinates wrapped into [0, 1)."""

    element: str
    fx: float
    fy: float
    fz: float

    def __post_init__(self):
        if not elements.is_known_symbol(self.element):
            raise InvalidStructureError(f"unknown element symbol {self.element!r}")
        for name in ("fx", "fy", "fz"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidStructureError(f"non-finite coordinate {name}={value!r}")
            object.__setattr__(self, name, geometry.wrap_frac(float(value)))

    @property
    def z(self) -> int:
        return elements.symbol_to_z(self.element)

    def frac(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz])


@dataclass(frozen=True)
class CrystalStructure:
    """Cell parameters plus an ordered, non-empty list of atomic sites.

    Identifiers are opaque single tokens (no whitespace) so that a structure
    can round-trip through its text serialization.
    """

    id: str
    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float
    sites: tuple[AtomSite, ...] = field(default=())

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise InvalidStructureError(f"id must be a non-empty single token, got {self.id!r}")
        for name in ("a", "b", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidStructureError(f"cell length {name}={value!r} must be positive")
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 < value < 180.0):
                raise InvalidStructureError(f"cell angle {name}={value!r} outside (0, 180)")
        # Raises DegenerateCellError when the angles are unrealizable.
        geometry.cell_volume(self.a, self.b, self.c, self.alpha, self.beta, self.gamma)
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.sites:
            raise InvalidStructureError("structure has no sites")

    # -- derived views ------------------------------------------------------

    @property
    def cell(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.alpha, self.beta, self.gamma)

    def lattice(self) -> np.ndarray:
        return geometry.lattice_from_params(*self.cell)

    def volume(self) -> float:
        return geometry.cell_volume(*self.cell)

    def frac_coords(self) -> np.ndarray:
        return np.array([[s.fx, s.fy, s.fz] for s in self.sites])

    def atomic_numbers(self) -> np.ndarray:
        return np.array([s.z for s in self.sites], dtype=np.int64)

    def formula(self) -> str:
        """Alphabetical element counts, e.g. C2H6O -> 'C2H6O'; count 1 omitted."""
        counts: dict[str, int] = {}
        for s in self.sites:
            counts[s.element] = counts.get(s.element, 0) + 1
        return "".join(
            f"{el}{n}" if n > 1 else el for el, n in sorted(counts.items())
        )


def structure_to_dict(s: CrystalStructure) -> dict:
    """JSON-ready dict preserving coordinates at full float precision."""
    return {
        "id": s.id,
        "a": s.a, "b": s.b, "c": s.c,
        "alpha": s.alpha, "beta": s.beta, "gamma": s.gamma,
        "sites": [
            {"element": site.element, "fx": site.fx, "fy": site.fy, "fz": site.fz}
            for site in s.sites
        ],
    }


def structure_from_dict(d: dict) -> CrystalStructure:
    return CrystalStructure(
        id=d["id"],
        a=d["a"], b=d["b"], c=d["c"],
        alpha=d["alpha"], beta=d["beta"], gamma=d["gamma"],
        sites=tuple(
            AtomSite(x["element"], x["fx"], x["fy"], x["fz"]) for x in d["sites"]
        ),
    )
