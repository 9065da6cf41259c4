"""Reading and writing a strict CIF subset, plus labeled-dataset manifests.

The supported dialect is deliberately narrow: one data block, P1 symmetry
(every listed site is taken literally, no symmetry expansion), the six
``_cell_length_*`` / ``_cell_angle_*`` tags, and one ``loop_`` whose columns
include ``_atom_site_type_symbol`` and ``_atom_site_fract_{x,y,z}``.  Any
``_symmetry_*`` tag is ignored with a warning.  Occupancy and disorder columns
are ignored.

Datasets are JSON-lines manifests; each line references a CIF file (relative
to the manifest) and carries any subset of the three property labels.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import elements
from .errors import (
    CifParseError,
    CrystalEvolveError,
    EmptyAtomLoopError,
    LineParseError,
    MalformedNumberError,
    MissingTagError,
    UnknownElementError,
)
from .structures import AtomSite, CrystalStructure

_CELL_TAGS = (
    "_cell_length_a", "_cell_length_b", "_cell_length_c",
    "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma",
)
_SITE_COLUMNS = (
    "_atom_site_type_symbol",
    "_atom_site_fract_x",
    "_atom_site_fract_y",
    "_atom_site_fract_z",
)

PROPERTY_NAMES = ("fe", "v", "de")

_MANIFEST_LABEL_KEYS = {
    "fe_percent": "fe",
    "voltage_v": "v",
    "free_energy_ev_atom": "de",
}


# --------------------------------------------------------------------------
# parsing

def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedNumberError(f"{what}: cannot parse number {token!r}", line_no) from None
    if not math.isfinite(value):
        raise MalformedNumberError(f"{what}: non-finite number {token!r}", line_no)
    return value


def parse_cif(text: str) -> CrystalStructure:
    """Parse one CIF data block into a CrystalStructure.

    Fractional coordinates are wrapped into [0, 1).  Errors name the offending
    line of the document.
    """
    lines = text.splitlines()
    block_id: str | None = None
    block_line = 0
    tags: dict[str, tuple[str, int]] = {}
    sites: list[AtomSite] = []
    saw_atom_loop = False
    warned_symmetry = False

    def is_content(raw: str) -> bool:
        stripped = raw.strip()
        return bool(stripped) and not stripped.startswith("#")

    i = 0
    n = len(lines)
    while i < n:
        raw = lines[i]
        line_no = i + 1
        i += 1
        if not is_content(raw):
            continue
        tokens = raw.split()
        head = tokens[0]

        if head.startswith("data_"):
            if block_id is not None:
                raise CifParseError("second data block; only one is supported", line_no)
            block_id = head[len("data_"):]
            if not block_id:
                raise CifParseError("data block has an empty name", line_no)
            block_line = line_no
            continue

        if block_id is None:
            raise CifParseError(f"content before any data block: {raw.strip()!r}", line_no)

        if head == "loop_":
            headers: list[tuple[str, int]] = []
            while i < n:
                peek = lines[i].strip()
                if peek.startswith("_"):
                    headers.append((peek.split()[0], i + 1))
                    i += 1
                else:
                    break
            if not headers:
                raise CifParseError("loop_ without column headers", line_no)
            header_names = [h[0] for h in headers]
            is_atom_loop = any(h.startswith("_atom_site_") for h in header_names)
            if any(h.startswith("_symmetry_") for h in header_names) and not warned_symmetry:
                warnings.warn("ignoring _symmetry_* loop; sites are taken as P1", stacklevel=2)
                warned_symmetry = True
            if is_atom_loop:
                missing = [c for c in _SITE_COLUMNS if c not in header_names]
                if missing:
                    raise MissingTagError(
                        f"atom site loop lacks column {missing[0]}", line_no
                    )
                saw_atom_loop = True
                col = {name: k for k, name in enumerate(header_names)}
            # consume rows until the next tag / loop_ / data_ line
            while i < n:
                row_raw = lines[i]
                row_no = i + 1
                stripped = row_raw.strip()
                if stripped.startswith(("_", "loop_", "data_")):
                    break
                i += 1
                if not is_content(row_raw):
                    continue
                row = row_raw.split()
                if len(row) != len(header_names):
                    raise CifParseError(
                        f"loop row has {len(row)} fields, expected {len(header_names)}",
                        row_no,
                    )
                if not is_atom_loop:
                    continue
                symbol = row[col["_atom_site_type_symbol"]]
                if not elements.is_known_symbol(symbol):
                    raise UnknownElementError(f"unknown element symbol {symbol!r}", row_no)
                fx = _parse_float(row[col["_atom_site_fract_x"]], row_no, "_atom_site_fract_x")
                fy = _parse_float(row[col["_atom_site_fract_y"]], row_no, "_atom_site_fract_y")
                fz = _parse_float(row[col["_atom_site_fract_z"]], row_no, "_atom_site_fract_z")
                sites.append(AtomSite(symbol, fx, fy, fz))
            continue

        if head.startswith("_"):
            if head.startswith("_symmetry_"):
                if not warned_symmetry:
                    warnings.warn(f"ignoring {head}; sites are taken as P1", stacklevel=2)
                    warned_symmetry = True
                continue
            if head in _CELL_TAGS:
                if len(tokens) != 2:
                    raise MalformedNumberError(
                        f"{head} expects exactly one value, got {len(tokens) - 1}", line_no
                    )
                tags[head] = (tokens[1], line_no)
            # other scalar tags are outside the subset and ignored
            continue

        raise CifParseError(f"unexpected content {raw.strip()!r}", line_no)

    if block_id is None:
        raise CifParseError("document contains no data block", 1)
    for tag in _CELL_TAGS:
        if tag not in tags:
            raise MissingTagError(f"required tag {tag} absent", block_line)
    cell = [_parse_float(tok, ln, tag) for tag, (tok, ln) in
            ((t, tags[t]) for t in _CELL_TAGS)]
    if not sites:
        raise EmptyAtomLoopError(
            "no atom sites found" if saw_atom_loop else "document has no atom site loop",
            block_line,
        )
    return CrystalStructure(block_id, *cell, sites=tuple(sites))


# --------------------------------------------------------------------------
# writing

def write_cif(structure: CrystalStructure) -> str:
    """Emit the canonical document for a structure.

    Numbers are printed with 6 decimal places and sites in input order, so
    parse(write(s)) equals s up to that quantization and is an exact fixpoint
    afterwards.
    """
    out = [f"data_{structure.id}"]
    for tag, value in zip(_CELL_TAGS, structure.cell):
        out.append(f"{tag}    {value:.6f}")
    out.append("loop_")
    out.extend(_SITE_COLUMNS)
    for site in structure.sites:
        out.append(f"{site.element} {site.fx:.6f} {site.fy:.6f} {site.fz:.6f}")
    out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# labeled datasets

@dataclass(frozen=True)
class PropertyLabels:
    """Any subset of the three property labels; absent labels are None."""

    fe: float | None = None
    v: float | None = None
    de: float | None = None

    def present(self) -> tuple[str, ...]:
        return tuple(name for name in PROPERTY_NAMES if getattr(self, name) is not None)

    def get(self, name: str) -> float | None:
        if name not in PROPERTY_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class LabeledEntry:
    """A structure with at least one property label and its provenance."""

    structure: CrystalStructure
    labels: PropertyLabels
    provenance: str = "measured"

    def __post_init__(self):
        if self.provenance not in ("measured", "predicted"):
            raise LineParseError(f"unknown provenance {self.provenance!r}")
        if not self.labels.present():
            raise LineParseError(f"entry {self.structure.id!r} carries no labels")
        fe = self.labels.fe
        if self.provenance == "measured" and fe is not None and not 0.0 <= fe <= 100.0:
            raise LineParseError(
                f"entry {self.structure.id!r}: measured fe={fe} outside [0, 100]"
            )


def load_dataset(manifest: str | Path) -> list[LabeledEntry]:
    """Load a JSON-lines manifest; CIF paths resolve against the manifest's
    directory."""
    manifest = Path(manifest)
    base = manifest.parent
    entries: list[LabeledEntry] = []
    with open(manifest, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise LineParseError(f"invalid JSON: {exc}", line_no) from None
            if not isinstance(record, dict) or "cif" not in record:
                raise LineParseError("line must be an object with a 'cif' field", line_no)
            labels = {}
            for key, name in _MANIFEST_LABEL_KEYS.items():
                if key in record and record[key] is not None:
                    value = record[key]
                    if not isinstance(value, (int, float)) or not math.isfinite(float(value)):
                        raise LineParseError(f"label {key} is not a finite number", line_no)
                    labels[name] = float(value)
            cif_path = base / record["cif"]
            if not cif_path.is_file():
                raise FileNotFoundError(f"{cif_path} (manifest line {line_no})")
            try:
                structure = parse_cif(cif_path.read_text(encoding="utf-8"))
            except CrystalEvolveError as exc:
                raise type(exc)(f"{cif_path}: {exc}") from exc
            try:
                entries.append(
                    LabeledEntry(
                        structure=structure,
                        labels=PropertyLabels(**labels),
                        provenance=record.get("provenance", "measured"),
                    )
                )
            except LineParseError as exc:
                raise LineParseError(str(exc), line_no) from None
    return entries


def entry_to_dict(entry: LabeledEntry) -> dict:
    from .structures import structure_to_dict

    return {
        "structure": structure_to_dict(entry.structure),
        "labels": {name: entry.labels.get(name) for name in PROPERTY_NAMES},
        "provenance": entry.provenance,
    }


def entry_from_dict(d: dict) -> LabeledEntry:
    from .structures import structure_from_dict

    return LabeledEntry(
        structure=structure_from_dict(d["structure"]),
        labels=PropertyLabels(**{k: v for k, v in d["labels"].items() if v is not None}),
        provenance=d["provenance"],
    )
