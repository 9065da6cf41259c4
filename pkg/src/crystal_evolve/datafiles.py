"""Paths to the bundled toy corpus so examples and tests run offline."""

from importlib import resources
from pathlib import Path


def _data_root() -> Path:
    return Path(resources.files(__package__)) / "data" / "toy"


def toy_pool_dir() -> Path:
    """Directory of 60 small synthetic seed structures."""
    return _data_root() / "pool"


def toy_train_manifest() -> Path:
    """15-entry labeled manifest for surrogate training."""
    return _data_root() / "train" / "manifest.jsonl"


def toy_heldout_manifest() -> Path:
    """Small labeled manifest kept out of training, for validation reports."""
    return _data_root() / "heldout" / "manifest.jsonl"
