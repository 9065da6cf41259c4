"""Scalar candidate score aggregating the three predicted properties.

The score consumes raw physical units (efficiency in percent, potential in
volts, free energy in eV/atom):

    score = fe / fe_div - de * de_mul - |v| / v_div

with default coefficients (5, 5, 2).  Higher efficiency, lower synthesis
energy, and smaller potential magnitude all raise the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ConfigError, CrystalEvolveError, NonFiniteInputError
from .graph import GraphConfig, build_graph
from .structures import CrystalStructure

PROPERTY_NAMES = ("fe", "v", "de")


@dataclass(frozen=True)
class PropertyVector:
    """(fe, v, de) in physical units.

    Measured efficiencies live in [0, 100] percent; model predictions may
    leave that interval and are passed through unchanged.
    """

    fe: float
    v: float
    de: float

    def __post_init__(self):
        for name in PROPERTY_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInputError(f"{name}={getattr(self, name)!r} is not finite")

    def get(self, name: str) -> float:
        if name not in PROPERTY_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {"fe": self.fe, "v": self.v, "de": self.de}


@dataclass(frozen=True)
class FitnessCoefficients:
    fe_div: float = 5.0
    de_mul: float = 5.0
    v_div: float = 2.0

    def __post_init__(self):
        if self.fe_div == 0 or self.v_div == 0:
            raise ConfigError("fe_div and v_div must be nonzero")

    def to_dict(self) -> dict:
        return {"fe_div": self.fe_div, "de_mul": self.de_mul, "v_div": self.v_div}


DEFAULT_COEFFICIENTS = FitnessCoefficients()


def fitness(p: PropertyVector, coeffs: FitnessCoefficients = DEFAULT_COEFFICIENTS) -> float:
    return p.fe / coeffs.fe_div - p.de * coeffs.de_mul - abs(p.v) / coeffs.v_div


def evaluate_candidate(models: Mapping[str, object],
                       structure: CrystalStructure,
                       graph_config: GraphConfig = GraphConfig(),
                       coeffs: FitnessCoefficients = DEFAULT_COEFFICIENTS,
                       ) -> tuple[PropertyVector, float]:
    """Build the graph once, predict each property, and score the candidate.

    ``models`` maps property name to anything with a
    ``predict_physical(graph)`` method (trained surrogates in production,
    constant stubs in tests).  Failures are re-raised naming the property
    model and structure involved.
    """
    from .surrogate import predict_physical

    g = build_graph(structure, graph_config)
    values = {}
    for name in PROPERTY_NAMES:
        model = models[name]
        try:
            if hasattr(model, "predict_physical"):
                values[name] = float(model.predict_physical(g))
            else:
                values[name] = float(predict_physical(model, g))
        except CrystalEvolveError as exc:
            raise type(exc)(
                f"property {name!r} on structure {structure.id!r}: {exc}"
            ) from exc
    vector = PropertyVector(**values)
    return vector, fitness(vector, coeffs)
