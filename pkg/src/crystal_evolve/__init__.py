"""Evolutionary crystal-structure screening with graph-network surrogates.

The pipeline: parse crystal structures from CIF, train one graph-convolution
regressor per target property, score candidates with a scalar fitness over
the three predictions, evolve a structure pool under that score, and feed the
evolved maxima back into the training set for the next pass.
"""

__version__ = "0.1.0"

from .cifio import LabeledEntry, PropertyLabels, load_dataset, parse_cif, write_cif
from .evolution import EvolutionConfig, Population, evolve
from .fitness import FitnessCoefficients, PropertyVector, evaluate_candidate, fitness
from .graph import CrystalGraph, GraphConfig, build_graph
from .structures import AtomSite, CrystalStructure
from .surrogate import (
    ModelConfig,
    SurrogateModel,
    init_model,
    load_model,
    predict_physical,
    save_model,
    train,
)

__all__ = [
    "AtomSite",
    "CrystalGraph",
    "CrystalStructure",
    "EvolutionConfig",
    "FitnessCoefficients",
    "GraphConfig",
    "LabeledEntry",
    "ModelConfig",
    "Population",
    "PropertyLabels",
    "PropertyVector",
    "SurrogateModel",
    "build_graph",
    "evaluate_candidate",
    "evolve",
    "fitness",
    "init_model",
    "load_dataset",
    "load_model",
    "parse_cif",
    "predict_physical",
    "save_model",
    "train",
    "write_cif",
]
