"""The outer training loop: train surrogates, evolve, re-insert the maxima.

Each cycle trains one surrogate per property on the current training set,
evolves a candidate pool against those models, takes the top structures of
the final generation, and appends them to the training set with their
predicted property values (provenance ``predicted``).  The next cycle retrains
on the grown set, so the models keep correcting themselves around the most
promising region of the search space.

Everything is deterministic for a fixed config: random streams are derived
statelessly from (seed, cycle, generation, slot), so an interrupted run
resumed from its checkpoint reproduces the uninterrupted result exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cifio import (
    LabeledEntry,
    PropertyLabels,
    entry_from_dict,
    entry_to_dict,
    load_dataset,
    parse_cif,
    write_cif,
)
from .errors import (
    ConfigError,
    CrystalEvolveError,
    PartialCheckpointError,
    RunError,
    SchemaVersionMismatchError,
)
from .evolution import EvolutionConfig, GenerationRecord, Member, evolve, select_elite
from .fitness import DEFAULT_COEFFICIENTS, FitnessCoefficients, evaluate_candidate
from .graph import GraphConfig, build_graph
from .structures import CrystalStructure
from .surrogate import (
    ModelConfig,
    SurrogateModel,
    TrainReport,
    init_model,
    save_model,
    train,
)

PROPERTY_NAMES = ("fe", "v", "de")
CHECKPOINT_SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    dataset_manifest: Path
    pool_dir: Path
    output_dir: Path
    atl_cycles: int = 3
    maxima_per_cycle: int = 5
    train_epochs: int = 1000
    learning_rate: float = 0.05
    warm_start: bool = False
    graph: GraphConfig = field(default_factory=GraphConfig)
    models: dict[str, ModelConfig] = field(default_factory=dict)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    fitness: FitnessCoefficients = DEFAULT_COEFFICIENTS

    def __post_init__(self):
        self.dataset_manifest = Path(self.dataset_manifest)
        self.pool_dir = Path(self.pool_dir)
        self.output_dir = Path(self.output_dir)
        if self.atl_cycles < 1:
            raise ConfigError(f"atl_cycles must be >= 1, got {self.atl_cycles}")
        if not 1 <= self.maxima_per_cycle <= self.evolution.elite_k:
            raise ConfigError(
                f"maxima_per_cycle={self.maxima_per_cycle} must be in "
                f"1..elite_k={self.evolution.elite_k}"
            )
        if self.train_epochs < 1 or self.learning_rate <= 0:
            raise ConfigError("train_epochs must be >= 1 and learning_rate > 0")
        for name in PROPERTY_NAMES:
            self.models.setdefault(name, ModelConfig())

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        """Load a run config; relative paths resolve against the file's
        directory.  Unknown keys are rejected."""
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {
            "dataset_manifest", "pool_dir", "output_dir", "atl_cycles",
            "maxima_per_cycle", "train_epochs", "learning_rate", "warm_start",
            "graph", "models", "evolution", "fitness",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        for required in ("dataset_manifest", "pool_dir", "output_dir"):
            if required not in doc:
                raise ConfigError(f"{path}: missing required key {required!r}")
        base = path.parent
        try:
            kwargs = {
                "dataset_manifest": base / doc["dataset_manifest"],
                "pool_dir": base / doc["pool_dir"],
                "output_dir": base / doc["output_dir"],
            }
            for key in ("atl_cycles", "maxima_per_cycle", "train_epochs",
                        "learning_rate", "warm_start"):
                if key in doc:
                    kwargs[key] = doc[key]
            if "graph" in doc:
                kwargs["graph"] = GraphConfig(**doc["graph"])
            if "models" in doc:
                kwargs["models"] = {
                    name: ModelConfig(**cfg) for name, cfg in doc["models"].items()
                }
            if "evolution" in doc:
                evo = dict(doc["evolution"])
                if evo.get("allowed_elements") is not None:
                    evo["allowed_elements"] = tuple(evo["allowed_elements"])
                kwargs["evolution"] = EvolutionConfig(**evo)
            if "fitness" in doc:
                kwargs["fitness"] = FitnessCoefficients(**doc["fitness"])
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass
class CycleResult:
    cycle: int
    train_reports: dict[str, TrainReport]
    generation_records: list[GenerationRecord]
    maxima: list[Member]
    training_set_size: int

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "train": {
                name: {
                    "epochs_run": rep.epochs_run,
                    "final_train_mse": rep.final_train_mse,
                    "loss_history": rep.loss_history,
                }
                for name, rep in self.train_reports.items()
            },
            "generations": [r.to_dict() for r in self.generation_records],
            "maxima": [
                {
                    "id": m.structure.id,
                    "fitness": m.fitness,
                    "properties": m.properties.to_dict(),
                }
                for m in self.maxima
            ],
            "training_set_size": self.training_set_size,
        }


@dataclass
class RunReport:
    cycles: list[dict]
    final_best: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "cycles": self.cycles,
            "final_best": self.final_best,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_pool(pool_dir: str | Path) -> list[CrystalStructure]:
    """Parse every *.cif under pool_dir, ordered by file name."""
    pool_dir = Path(pool_dir)
    paths = sorted(pool_dir.glob("*.cif"))
    structures = []
    for p in paths:
        try:
            structures.append(parse_cif(p.read_text(encoding="utf-8")))
        except CrystalEvolveError as exc:
            raise type(exc)(f"{p}: {exc}") from exc
    return structures


def _train_models(training_set: list[LabeledEntry],
                  config: RunConfig,
                  previous: dict[str, SurrogateModel] | None,
                  ) -> tuple[dict[str, SurrogateModel], dict[str, TrainReport]]:
    models: dict[str, SurrogateModel] = {}
    reports: dict[str, TrainReport] = {}
    for name in PROPERTY_NAMES:
        labeled = [e for e in training_set if e.labels.get(name) is not None]
        graphs = [(build_graph(e.structure, config.graph), e.labels.get(name))
                  for e in labeled]
        if config.warm_start and previous:
            model = previous[name]
        else:
            model = init_model(config.models[name], name,
                               edge_feature_size=config.graph.basis_size)
        model, report = train(model, graphs, config.train_epochs, config.learning_rate)
        models[name] = model
        reports[name] = report
    return models, reports


def _distinct_top(members: list[Member], count: int) -> list[Member]:
    picked: list[Member] = []
    seen: set[str] = set()
    for m in members:
        if m.structure.id in seen:
            continue
        seen.add(m.structure.id)
        picked.append(m)
        if len(picked) == count:
            break
    return picked


def _write_checkpoint(path: Path, training_set: list[LabeledEntry],
                      cycles: list[dict]) -> None:
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "cycles_completed": len(cycles),
        "training_set": [entry_to_dict(e) for e in training_set],
        "cycles": cycles,
        "terminal": True,
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise PartialCheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise PartialCheckpointError(f"{path}: not a checkpoint file")
    if doc["schema_version"] != CHECKPOINT_SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"{path}: schema_version {doc['schema_version']!r} != {CHECKPOINT_SCHEMA_VERSION}"
        )
    if not doc.get("terminal"):
        raise PartialCheckpointError(f"{path}: terminal marker missing; write was interrupted")
    return doc


def run(config: RunConfig, resume_from: str | Path | None = None) -> RunReport:
    """Execute the full loop; artifacts land under config.output_dir.

    ``resume_from`` continues a checkpointed run; the completed cycles are
    taken from the checkpoint and the remaining ones reproduce exactly what an
    uninterrupted run would have done.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        training_set = [entry_from_dict(d) for d in state["training_set"]]
        cycles: list[dict] = state["cycles"]
        start_cycle = state["cycles_completed"] + 1
    else:
        try:
            training_set = load_dataset(config.dataset_manifest)
        except (CrystalEvolveError, OSError) as exc:
            raise RunError(0, "load-dataset", exc)
        cycles = []
        start_cycle = 1

    try:
        pool = load_pool(config.pool_dir)
    except (CrystalEvolveError, OSError) as exc:
        raise RunError(0, "load-pool", exc)

    models: dict[str, SurrogateModel] | None = None
    final_best: dict | None = None

    for cycle in range(start_cycle, config.atl_cycles + 1):
        try:
            models, reports = _train_models(training_set, config, models)
        except CrystalEvolveError as exc:
            raise RunError(cycle, "train", exc)

        def evaluate(structure: CrystalStructure):
            return evaluate_candidate(models, structure, config.graph, config.fitness)

        try:
            final_pop, records = evolve(
                pool, evaluate, config.evolution, stream_prefix=(cycle,)
            )
        except CrystalEvolveError as exc:
            raise RunError(cycle, "evolve", exc)

        # rank the whole final population so duplicated elites skip to the
        # next distinct candidate without starving the re-insertion count
        ranked = select_elite(final_pop, len(final_pop.members))
        maxima = _distinct_top(ranked, config.maxima_per_cycle)
        if len(maxima) < config.maxima_per_cycle:
            raise RunError(
                cycle, "select-maxima",
                CrystalEvolveError(
                    f"only {len(maxima)} distinct structures in the final generation"
                ),
            )
        for m in maxima:
            training_set.append(
                LabeledEntry(
                    structure=m.structure,
                    labels=PropertyLabels(
                        fe=m.properties.fe, v=m.properties.v, de=m.properties.de
                    ),
                    provenance="predicted",
                )
            )

        try:
            cycle_dir = out / f"cycle_{cycle}"
            (cycle_dir / "models").mkdir(parents=True, exist_ok=True)
            (cycle_dir / "maxima").mkdir(parents=True, exist_ok=True)
            for name, model in models.items():
                save_model(model, cycle_dir / "models" / f"{name}.json")
            with open(cycle_dir / "generations.jsonl", "w", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            for m in maxima:
                (cycle_dir / "maxima" / f"{m.structure.id}.cif").write_text(
                    write_cif(m.structure), encoding="utf-8"
                )
        except OSError as exc:
            raise RunError(cycle, "write-artifacts", exc)

        result = CycleResult(
            cycle=cycle,
            train_reports=reports,
            generation_records=records,
            maxima=maxima,
            training_set_size=len(training_set),
        )
        cycles.append(result.to_dict())
        final_best = {
            "id": maxima[0].structure.id,
            "fitness": maxima[0].fitness,
            "properties": maxima[0].properties.to_dict(),
        }
        _write_checkpoint(out / "checkpoint.json", training_set, cycles)

    if final_best is None:
        # resumed with no cycles left: report exactly the checkpointed state
        top = cycles[-1]["maxima"][0]
        final_best = {
            "id": top["id"], "fitness": top["fitness"], "properties": top["properties"],
        }

    report = RunReport(cycles=cycles, final_best=final_best)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report
