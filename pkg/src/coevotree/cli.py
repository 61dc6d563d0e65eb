"""Command-line surface: train, evaluate, cart, nash-solve.

Every run emits a machine-readable report that pins all seeds and
hyperparameters, so results can be reproduced bit-exactly from the report
alone. Exit codes: 0 success, 2 configuration error, 3 data error,
4 internal fault.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .cart import CartParams, build_cart
from .dataset import DataError, Dataset, FeatureScaling, load_csv, normalize, split_dataset
from .engine import CoevolutionConfig, ConfigError, evolve
from .hall_of_fame import HofPolicy
from .metrics import ObjectiveMode, PerturbationSampleScorer, accuracy, estimate_final_metrics
from .nash import solve_zero_sum
from .tree import TreeValidationError, deserialize_tree, serialize_tree, tree_document

REPORT_FORMAT_VERSION = 1
DEFAULT_SAMPLES = 100_000


class ReportError(ValueError):
    """A run report is malformed or from an unknown format version."""


# --------------------------------------------------------------------------
# Config plumbing: defaults < config file < explicit flags.

_CONFIG_FIELDS = {
    "tree_population_size": int,
    "perturbation_population_size": int,
    "crossover_rate": float,
    "mutation_rate": float,
    "selection_pressure": float,
    "elite_count": int,
    "phase_length": int,
    "max_generations": int,
    "top_k": int,
    "mutation_trials": int,
    "min_depth": int,
    "max_depth": int,
    "depth_cap": int,
    "objective": str,
    "hof_policy": str,
    "hof_max_size": "optional_int",
    "aggregation": str,
    "perturbation_grid": "optional_int",
    "cart_max_depth": int,
    "cart_min_samples_split": int,
    "cart_min_impurity_decrease": float,
    "seed": int,
}


def _coerce(field: str, raw: str):
    kind = _CONFIG_FIELDS[field]
    raw = raw.strip()
    if kind == "optional_int":
        return None if raw.lower() in ("none", "unbounded", "inf") else int(raw)
    return kind(raw)


def parse_config_file(text: str) -> dict:
    """Flat ``key = value`` document mirroring the config field names."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {line_no}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"config line {line_no}: {exc}") from exc
    return values


def build_config(args) -> CoevolutionConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(Path(args.config).read_text(encoding="utf-8")))
    for field in _CONFIG_FIELDS:
        flag = getattr(args, field, None)
        if flag is not None:
            values[field] = flag
    if "objective" in values:
        values["objective"] = ObjectiveMode(values["objective"])
    if "hof_policy" in values:
        values["hof_policy"] = HofPolicy(values["hof_policy"])
    try:
        config = CoevolutionConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def config_echo(config: CoevolutionConfig) -> dict:
    echo = {}
    for field in _CONFIG_FIELDS:
        value = getattr(config, field)
        echo[field] = value.value if hasattr(value, "value") else value
    return echo


# --------------------------------------------------------------------------
# Report documents.

def dataset_summary(dataset: Dataset, scaling: FeatureScaling, source: dict) -> dict:
    return {
        "name": dataset.name,
        "source": source,
        "instances": len(dataset),
        "features": dataset.feature_count,
        "classes": dataset.class_count,
        "epsilon": dataset.epsilon,
        "class_labels": list(dataset.class_labels),
        "scaling": {
            "minimums": [float(v) for v in scaling.minimums],
            "maximums": [float(v) for v in scaling.maximums],
        },
    }


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def dump_document(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_report(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"report is not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != REPORT_FORMAT_VERSION:
        raise ReportError(f"unknown report format version {version!r}")
    return doc


def _set_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    import numba

    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def _load_dataset(args) -> tuple[Dataset, FeatureScaling, dict]:
    table = load_csv(args.data, label_column=args.label_column, header=args.header)
    dataset, scaling = normalize(table, args.epsilon)
    source = {
        "path": str(args.data),
        "label_column": args.label_column,
        "header": args.header,
    }
    return dataset, scaling, source


# --------------------------------------------------------------------------
# Subcommands.

def cmd_train(args) -> int:
    _set_threads(args.threads)
    dataset, scaling, source = _load_dataset(args)
    eval_dataset = dataset
    if args.holdout_fraction is not None:
        dataset, eval_dataset = split_dataset(dataset, args.holdout_fraction,
                                              args.holdout_seed)
        source["holdout_fraction"] = args.holdout_fraction
        source["holdout_seed"] = args.holdout_seed
    config = build_config(args)

    warm = []
    for path in args.init_trees or []:
        tree = deserialize_tree(Path(path).read_text(encoding="utf-8"))
        if tree.feature_count != dataset.feature_count:
            raise DataError(f"warm-start tree {path} expects {tree.feature_count} "
                            f"features, dataset has {dataset.feature_count}")
        warm.append(tree)

    progress = None
    if args.verbose:
        def progress(event):
            print(
                f"[{event['phase']}] generation {event['generation']} "
                f"best {event['best_fitness']:.6f} mean {event['mean_fitness']:.6f}",
                file=sys.stderr,
            )

    started = time.perf_counter()
    result = evolve(dataset, config, warm_start_trees=warm or None, progress=progress)
    eval_seed = args.eval_seed if args.eval_seed is not None else config.seed
    result.final_metrics = estimate_final_metrics(
        result.best_tree, eval_dataset, args.samples, eval_seed)
    elapsed = time.perf_counter() - started

    out_tree = args.out_tree or f"{dataset.name}.tree.json"
    out_report = args.out_report or f"{dataset.name}.report.json"
    tree_text = serialize_tree(result.best_tree)
    write_text(out_tree, tree_text)
    report = {
        "format_version": REPORT_FORMAT_VERSION,
        "dataset": dataset_summary(dataset, scaling, source),
        "config": config_echo(config),
        "result": {
            "best_fitness": result.best_fitness,
            "generations_run": result.generations_run,
            "stop_reason": result.stop_reason.value,
            "best_tree": tree_document(result.best_tree),
        },
        "final_metrics": result.final_metrics,
        "diagnostics": result.diagnostics,
        "wall_clock_seconds": round(elapsed, 3),
    }
    write_text(out_report, dump_document(report))
    print(f"best fitness {result.best_fitness:.6f} after {result.generations_run} "
          f"generations ({result.stop_reason.value})")
    print(f"adversarial accuracy estimate {result.final_metrics['adversarial_accuracy_estimate']:.6f}")
    print(f"max regret estimate {result.final_metrics['max_regret_estimate']:.6f}")
    print(f"tree written to {out_tree}")
    print(f"report written to {out_report}")
    return 0


def cmd_evaluate(args) -> int:
    _set_threads(args.threads)
    dataset, scaling, source = _load_dataset(args)
    tree = deserialize_tree(Path(args.tree).read_text(encoding="utf-8"))
    if tree.feature_count != dataset.feature_count:
        raise DataError(f"tree expects {tree.feature_count} features, "
                        f"dataset has {dataset.feature_count}")
    scorer = PerturbationSampleScorer(dataset, args.samples, args.seed)
    doc = {
        "format_version": REPORT_FORMAT_VERSION,
        "dataset": dataset_summary(dataset, scaling, source),
        "tree_file": str(args.tree),
        "metrics": estimate_final_metrics(tree, dataset, args.samples, args.seed,
                                          scorer=scorer),
    }
    text = dump_document(doc)
    if args.out:
        write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_cart(args) -> int:
    _set_threads(args.threads)
    dataset, scaling, source = _load_dataset(args)
    params = CartParams(args.max_depth, args.min_samples_split,
                        args.min_impurity_decrease)
    tree = build_cart(dataset.instances, dataset.labels, params, dataset.class_count)
    out_tree = args.out or f"{dataset.name}.cart.tree.json"
    write_text(out_tree, serialize_tree(tree))
    doc = {
        "format_version": REPORT_FORMAT_VERSION,
        "dataset": dataset_summary(dataset, scaling, source),
        "params": {
            "max_depth": params.max_depth,
            "min_samples_split": params.min_samples_split,
            "min_impurity_decrease": params.min_impurity_decrease,
        },
        "training_accuracy": accuracy(tree, dataset.instances, dataset.labels),
        "depth": tree.depth,
        "nodes": len(tree),
        "tree_file": str(out_tree),
    }
    sys.stdout.write(dump_document(doc))
    return 0


def cmd_nash_solve(args) -> int:
    rows = []
    text = Path(args.matrix).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rows.append([float(cell) for cell in stripped.split()])
        except ValueError as exc:
            raise DataError(f"{args.matrix}: line {line_no}: {exc}") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise DataError(f"{args.matrix}: matrix rows are empty or ragged")
    equilibrium = solve_zero_sum(np.asarray(rows), initial_label=args.initial_label)
    print("row-strategy:", " ".join(repr(float(v)) for v in equilibrium.row_strategy))
    print("column-strategy:", " ".join(repr(float(v)) for v in equilibrium.column_strategy))
    print("value:", repr(float(equilibrium.value)))
    print("method:", equilibrium.method)
    return 0


# --------------------------------------------------------------------------
# Parser assembly.

def _add_data_flags(sub):
    sub.add_argument("--data", required=True, help="CSV file with one label column")
    sub.add_argument("--label-column", type=int, default=-1,
                     help="label column index (default: last)")
    sub.add_argument("--header", action="store_true",
                     help="first row is a header")


def _add_thread_flag(sub):
    sub.add_argument("--threads", type=int, default=None,
                     help="evaluation threads (default: machine parallelism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevotree",
        description="Coevolutionary training of perturbation-robust decision trees.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a robust tree on a CSV dataset")
    _add_data_flags(train)
    train.add_argument("--epsilon", type=float, required=True,
                       help="L-infinity radius in normalized feature units")
    train.add_argument("--mode", dest="objective",
                       choices=[m.value for m in ObjectiveMode], default=None,
                       help="objective (default: adversarial-accuracy)")
    train.add_argument("--config", help="flat key = value config file")
    train.add_argument("--init-trees", nargs="+", default=None,
                       help="tree files merged into the initial population")
    train.add_argument("--out-tree", help="best-tree output path")
    train.add_argument("--out-report", help="run report output path")
    train.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                       help="perturbation samples for the final metric estimates")
    train.add_argument("--eval-seed", type=int, default=None,
                       help="sample-set seed for final metrics (default: run seed)")
    train.add_argument("--holdout-fraction", type=float, default=None,
                       help="seeded random holdout evaluated instead of training data")
    train.add_argument("--holdout-seed", type=int, default=0)
    train.add_argument("--verbose", action="store_true",
                       help="print per-generation progress to stderr")
    _add_thread_flag(train)
    for field, kind in _CONFIG_FIELDS.items():
        if field == "objective":
            continue
        flag = "--" + field.replace("_", "-")
        if kind == "optional_int":
            train.add_argument(flag, type=lambda s, f=field: _coerce(f, s), default=None)
        elif kind in (int, float):
            train.add_argument(flag, type=kind, default=None)
        else:
            train.add_argument(flag, default=None)
    train.set_defaults(func=cmd_train)

    evaluate = commands.add_parser("evaluate",
                                   help="score a tree file on a seeded perturbation sample")
    _add_data_flags(evaluate)
    evaluate.add_argument("--epsilon", type=float, required=True)
    evaluate.add_argument("--tree", required=True, help="tree file to score")
    evaluate.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--out", help="also write the metrics document here")
    _add_thread_flag(evaluate)
    evaluate.set_defaults(func=cmd_evaluate)

    cart = commands.add_parser("cart", help="fit the greedy baseline tree")
    _add_data_flags(cart)
    cart.add_argument("--epsilon", type=float, default=0.0,
                      help="stored in the dataset summary only")
    cart.add_argument("--max-depth", type=int, default=10)
    cart.add_argument("--min-samples-split", type=int, default=2)
    cart.add_argument("--min-impurity-decrease", type=float, default=0.0)
    cart.add_argument("--out", help="tree output path")
    _add_thread_flag(cart)
    cart.set_defaults(func=cmd_cart)

    nash = commands.add_parser("nash-solve",
                               help="solve a zero-sum matrix game from a text file")
    nash.add_argument("--matrix", required=True,
                      help="whitespace-separated matrix, one row per line")
    nash.add_argument("--initial-label", type=int, default=0)
    nash.set_defaults(func=cmd_nash_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TreeValidationError, ReportError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        print("internal fault:", file=sys.stderr)
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
