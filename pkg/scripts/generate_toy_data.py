#!/usr/bin/env python3
"""Regenerate the bundled toy corpus (seed pool, training and held-out
manifests).

The labels are smooth synthetic functions of composition and cell geometry:
metal-rich, dense structures get higher efficiency and lower formation
energy.  That gives the surrogates a learnable signal and the evolution a
direction to climb, while keeping every value in a physically plausible
range.  Run from the repository root:

    python3 scripts/generate_toy_data.py
"""

import json
from pathlib import Path

import numpy as np

from crystal_evolve.cifio import write_cif
from crystal_evolve.elements import symbol_to_z
from crystal_evolve.structures import AtomSite, CrystalStructure

ROOT = Path(__file__).resolve().parents[1] / "src" / "crystal_evolve" / "data" / "toy"

PALETTE = ("C", "N", "O", "H", "Si", "S", "Cu", "Fe", "Mg", "Zn", "Sn", "Se")
METALS = {"Cu", "Fe", "Mg", "Zn", "Sn", "Se"}


def random_structure(rng: np.random.Generator, ident: str) -> CrystalStructure:
    n_sites = int(rng.integers(2, 7))
    a, b, c = rng.uniform(4.5, 7.5, 3)
    alpha, beta, gamma = rng.uniform(80.0, 100.0, 3)
    sites = tuple(
        AtomSite(PALETTE[int(rng.integers(0, len(PALETTE)))], *rng.random(3))
        for _ in range(n_sites)
    )
    return CrystalStructure(ident, a, b, c, alpha, beta, gamma, sites=sites)


def labels_for(s: CrystalStructure) -> dict:
    metal_frac = sum(site.element in METALS for site in s.sites) / len(s.sites)
    mean_z = float(np.mean([symbol_to_z(site.element) for site in s.sites])) / 100.0
    vol_per_atom = s.volume() / len(s.sites)
    fe = 20.0 + 60.0 * metal_frac + 15.0 * mean_z
    v = 2.0 + 6.0 * mean_z + 2.0 * metal_frac + 0.02 * vol_per_atom
    de = -1.0 - 3.0 * metal_frac + 1.5 * mean_z + 0.002 * vol_per_atom
    return {
        "fe_percent": round(fe, 4),
        "voltage_v": round(v, 4),
        "free_energy_ev_atom": round(de, 4),
    }


def emit_group(dirname: str, prefix: str, count: int, rng, with_manifest: bool) -> None:
    out = ROOT / dirname
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for k in range(count):
        s = random_structure(rng, f"{prefix}{k:03d}")
        name = f"{s.id}.cif"
        (out / name).write_text(write_cif(s), encoding="utf-8")
        lines.append({"cif": name, **labels_for(s)})
    if with_manifest:
        with open(out / "manifest.jsonl", "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(json.dumps(line) + "\n")


def main() -> None:
    rng = np.random.default_rng(20240917)
    emit_group("pool", "pool", 60, rng, with_manifest=False)
    emit_group("train", "train", 15, rng, with_manifest=True)
    emit_group("heldout", "held", 4, rng, with_manifest=True)
    print(f"toy corpus written under {ROOT}")


if __name__ == "__main__":
    main()
