"""Command-line surface for the whole pipeline.

Exit codes are a stable contract for scripting: 0 success, 1 config/flag
error, 2 parse error, 3 training error, 4 run error, 5 report error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .atl import RunConfig, load_pool
from .atl import run as run_atl
from .cifio import load_dataset, parse_cif, write_cif
from .errors import (
    ConfigError,
    CrystalEvolveError,
    DegenerateCellError,
    EdgelessGraphError,
    InvalidStructureError,
    RunError,
)
from .evolution import EvolutionConfig, evolve
from .fitness import DEFAULT_COEFFICIENTS, PropertyVector, evaluate_candidate, fitness
from .graph import GraphConfig, build_graph
from .surrogate import ModelConfig, init_model, load_model, predict_physical, save_model, train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARSE = 2
EXIT_TRAIN = 3
EXIT_RUN = 4
EXIT_REPORT = 5

_PARSE_ERRORS = (CrystalEvolveError, OSError)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so flag errors map to code 1."""

    def error(self, message):
        raise ConfigError(message)


def _graph_config_from_args(args) -> GraphConfig:
    kwargs = {}
    if getattr(args, "cutoff", None) is not None:
        kwargs["cutoff"] = args.cutoff
    if getattr(args, "max_neighbors", None) is not None:
        kwargs["max_neighbors"] = args.max_neighbors
    return GraphConfig(**kwargs)


# --------------------------------------------------------------------------
# commands

def cmd_parse(args) -> int:
    try:
        structure = parse_cif(Path(args.cif).read_text(encoding="utf-8"))
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.echo:
        sys.stdout.write(write_cif(structure))
    else:
        a, b, c, al, be, ga = structure.cell
        print(
            f"id={structure.id} formula={structure.formula()} "
            f"cell=({a:.4f}, {b:.4f}, {c:.4f}, {al:.3f}, {be:.3f}, {ga:.3f}) "
            f"sites={len(structure.sites)}"
        )
    return EXIT_OK


def cmd_graph(args) -> int:
    try:
        structure = parse_cif(Path(args.cif).read_text(encoding="utf-8"))
        g = build_graph(structure, _graph_config_from_args(args))
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(
        f"id={g.source_id} nodes={g.n_nodes} edges={g.n_edges} "
        f"min_dist={g.edge_distances.min():.4f} max_dist={g.edge_distances.max():.4f}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        entries = load_dataset(args.manifest)
        config = GraphConfig()
        labeled = [e for e in entries if e.labels.get(args.property) is not None]
        dataset = [
            (build_graph(e.structure, config), e.labels.get(args.property))
            for e in labeled
        ]
        model = init_model(
            ModelConfig(
                embed_dim=args.embed_dim,
                n_conv=args.layers,
                hidden_dim=args.hidden_dim,
                seed=args.seed,
            ),
            args.property,
            edge_feature_size=config.basis_size,
        )
        model, report = train(model, dataset, args.epochs, args.lr)
        save_model(model, args.out)
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    print(f"property={args.property} epochs={report.epochs_run} "
          f"final_train_mse={report.final_train_mse:.6e} model={args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        structure = parse_cif(Path(args.cif).read_text(encoding="utf-8"))
        g = build_graph(structure, GraphConfig())
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    values = {}
    try:
        for model_path in args.model:
            model = load_model(model_path)
            values[model.property_name] = predict_physical(model, g)
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    for name, value in values.items():
        print(f"{name} {value!r}")
    if set(values) == {"fe", "v", "de"}:
        print(f"fitness {fitness(PropertyVector(**values))!r}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    try:
        models = {
            "fe": load_model(args.fe_model),
            "v": load_model(args.v_model),
            "de": load_model(args.de_model),
        }
        pool = load_pool(args.pool_dir)
        config = EvolutionConfig(
            pool_size=args.pool_size if args.pool_size is not None else len(pool),
            elite_k=args.elite_k,
            generations=args.generations,
            rng_seed=args.seed,
        )
        graph_config = GraphConfig()

        def evaluate(structure):
            return evaluate_candidate(models, structure, graph_config)

        final_pop, records = evolve(pool, evaluate, config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "generations.jsonl", "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        best = max(final_pop.members, key=lambda m: (m.fitness, m.structure.id))
        (out / "best.cif").write_text(write_cif(best.structure), encoding="utf-8")
    except (CrystalEvolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    print(f"best={best.structure.id} fitness={best.fitness!r} "
          f"records={out / 'generations.jsonl'}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = RunConfig.from_json_file(args.config)  # ConfigError -> exit 1
    try:
        report = run_atl(config, resume_from=args.resume)
    except (RunError, CrystalEvolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    best = report.final_best
    print(f"best={best['id']} fitness={best['fitness']!r} "
          f"report={config.output_dir / 'report.json'}")
    return EXIT_OK


def _report_fitness_hist(args, out_fh) -> int:
    run_dir = Path(args.run)
    cycle_dirs = sorted(run_dir.glob("cycle_*"), key=lambda p: int(p.name.split("_")[1]))
    if not cycle_dirs:
        print(f"error: no cycle records under {run_dir}", file=sys.stderr)
        return EXIT_REPORT
    cycle_dir = (
        run_dir / f"cycle_{args.cycle}" if args.cycle is not None else cycle_dirs[-1]
    )
    records_path = cycle_dir / "generations.jsonl"
    if not records_path.is_file():
        print(f"error: {records_path} is missing", file=sys.stderr)
        return EXIT_REPORT
    writer = csv.writer(out_fh)
    writer.writerow(["generation", "bin_low", "bin_high", "count"])
    with open(records_path, encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            for bin_ in record["histogram"]:
                writer.writerow(
                    [record["generation_index"], bin_["low"], bin_["high"], bin_["count"]]
                )
    return EXIT_OK


def _report_validation(args, out_fh) -> int:
    run_dir = Path(args.run)
    if args.manifest is None:
        raise ConfigError("--manifest is required for --what validation")
    cycle_dirs = sorted(run_dir.glob("cycle_*"), key=lambda p: int(p.name.split("_")[1]))
    if not cycle_dirs:
        print(f"error: no cycle records under {run_dir}", file=sys.stderr)
        return EXIT_REPORT
    cycle_dir = (
        run_dir / f"cycle_{args.cycle}" if args.cycle is not None else cycle_dirs[-1]
    )
    models = {}
    for name in ("fe", "v", "de"):
        model_path = cycle_dir / "models" / f"{name}.json"
        if not model_path.is_file():
            print(f"error: {model_path} is missing", file=sys.stderr)
            return EXIT_REPORT
        models[name] = load_model(model_path)
    entries = load_dataset(args.manifest)
    config = GraphConfig()
    writer = csv.writer(out_fh)
    writer.writerow(["id", "property", "label", "prediction"])
    for entry in entries:
        g = build_graph(entry.structure, config)
        for name in entry.labels.present():
            writer.writerow(
                [entry.structure.id, name, entry.labels.get(name),
                 predict_physical(models[name], g)]
            )
    return EXIT_OK


def cmd_report(args) -> int:
    if args.format != "csv":
        raise ConfigError(f"unsupported format {args.format!r}")
    sink = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.what == "fitness-hist":
            return _report_fitness_hist(args, sink)
        return _report_validation(args, sink)
    except (CrystalEvolveError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REPORT
    finally:
        if args.out:
            sink.close()


# --------------------------------------------------------------------------
# parser wiring

def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="crystal-evolve",
                             description="evolutionary crystal screening pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a CIF file and print a summary")
    p.add_argument("--cif", required=True)
    p.add_argument("--echo", action="store_true",
                   help="re-emit the canonical document instead of a summary")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("graph", help="build the crystal graph and print its shape")
    p.add_argument("--cif", required=True)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--max-neighbors", dest="max_neighbors", type=int)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="train one property model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--property", required=True, choices=["fe", "v", "de"])
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict properties of a CIF with saved models")
    p.add_argument("--cif", required=True)
    p.add_argument("--model", action="append", required=True,
                   help="model checkpoint; repeat for several properties")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evolve", help="run one evolution pass with saved models")
    p.add_argument("--pool-dir", dest="pool_dir", required=True)
    p.add_argument("--fe-model", dest="fe_model", required=True)
    p.add_argument("--v-model", dest="v_model", required=True)
    p.add_argument("--de-model", dest="de_model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--elite-k", dest="elite_k", type=int, default=10)
    p.add_argument("--generations", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("run", help="run the full train/evolve/re-insert loop")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", help="checkpoint.json from an interrupted run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="emit CSV data behind a finished run")
    p.add_argument("--run", required=True)
    p.add_argument("--what", required=True, choices=["fitness-hist", "validation"])
    p.add_argument("--format", default="csv")
    p.add_argument("--cycle", type=int)
    p.add_argument("--manifest", help="held-out manifest (validation only)")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())
