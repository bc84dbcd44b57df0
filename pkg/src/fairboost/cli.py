"""Command-line entry point ``fairboost``.

Subcommands::

    fairboost run --config FILE --out DIR [--seeds N] [--jobs N] [--master-seed S]
    fairboost transform --config FILE --algo {rw,lfr,op} --in CSV --out CSV|JSON [--dataset NAME] [--seed S]
    fairboost evaluate --pred CSV --truth CSV --groups CSV
    fairboost report --results JSON --format {json,csv,markdown} [--out DIR]

On success the exit code is 0 and a JSON summary goes to stdout (``report``
without ``--out`` prints the rendered report instead). On failure the exit code
is nonzero and stderr carries one JSON object
``{"status": "error", "error": <type>, "message": <text>}``. Exit code 2 means
invalid arguments, 1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import CATEGORICAL, TabularDataset, discretize, encode_onehot, load_csv
from .ensemble import LFR, OP, RW, derive_seed
from .errors import ConfigError, FairboostError
from .experiment import (
    FORMATS,
    emit_report,
    load_config,
    results_to_dict,
    run_grid,
)
from .experiment.report import render_grid_csv, render_json, render_markdown
from .metrics import evaluate
from .preprocess import lfr_fit, lfr_transform, op_fit, op_transform, reweigh_apply, reweigh_fit
from .presets import get_preset

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(FairboostError):
    """Invalid command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def cmd_run(args) -> int:
    config = load_config(args.config).with_overrides(args.seeds, args.master_seed)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    results = results_to_dict(config, run_grid(config, jobs=args.jobs))
    paths = []
    for fmt in FORMATS:
        paths += emit_report(results, fmt, args.out)
    _emit({"status": "ok", "files": [str(p) for p in paths], **results["summary"]})
    return EXIT_OK


def _frame(ds: TabularDataset, label_column: str, protected_column: str) -> pd.DataFrame:
    """Readable table of a (possibly transformed) dataset: categorical codes
    become category names, plus label, protected and weight columns."""
    data = {}
    for j, col in enumerate(ds.schema):
        values = ds.X[:, j]
        if col.kind == CATEGORICAL and col.categories:
            data[col.name] = [col.categories[int(v)] for v in values]
        else:
            data[col.name] = values
    data[label_column] = ds.y
    data[protected_column] = ds.s
    data["weight"] = ds.w
    return pd.DataFrame(data)


def cmd_transform(args) -> int:
    config = load_config(args.config)
    if args.dataset is None:
        dataset = config.datasets[0]
    else:
        matches = [d for d in config.datasets if d.name == args.dataset]
        if not matches:
            raise ConfigError(f"dataset {args.dataset!r} is not in the config")
        dataset = matches[0]
    spec = get_preset(dataset.name)
    raw = load_csv(args.input, spec)
    seed = derive_seed(config.master_seed if args.seed is None else args.seed, "transform", args.algo)

    if args.algo == RW:
        model = reweigh_fit(raw)
        out = reweigh_apply(model, raw)
    elif args.algo == OP:
        data = discretize(raw, config.bins_per_column)
        model = op_fit(data, dataset.op)
        out = op_transform(model, data, seed)
    else:
        data = encode_onehot(discretize(raw, config.bins_per_column))
        model = lfr_fit(data, dataset.lfr, seed)
        out = lfr_transform(model, data)

    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(model.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    else:
        _frame(out, spec.label_column, spec.protected_column).to_csv(path, index=False)
    summary = {"status": "ok", "algo": args.algo, "dataset": dataset.name, "rows": out.n,
               "out": str(path), "positive_rate": float(np.mean(out.y)) if out.n else None}
    _emit(summary)
    return EXIT_OK


def _column(path, name: str) -> np.ndarray:
    df = pd.read_csv(path)
    if df.shape[1] == 0:
        raise ConfigError(f"{path}: no columns")
    col = df[name] if name in df.columns else df.iloc[:, 0]
    values = pd.to_numeric(col, errors="coerce")
    if values.isna().any():
        raise ConfigError(f"{path}: non-numeric or missing values in column {col.name!r}")
    return values.to_numpy()


def cmd_evaluate(args) -> int:
    pred = _column(args.pred, "prediction")
    truth = _column(args.truth, "label")
    groups = _column(args.groups, "group")
    if not len(pred) == len(truth) == len(groups):
        raise ConfigError(f"length mismatch: pred {len(pred)}, truth {len(truth)}, groups {len(groups)}")
    test = TabularDataset(np.zeros((len(truth), 0)), truth, groups)
    report = evaluate(pred.astype(int), test)
    _emit({"status": "ok", "report": report.to_dict()})
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.results)
    if not path.exists():
        raise ConfigError(f"results file not found: {path}")
    try:
        results = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(results, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if args.out is None:
        render = {"json": render_json, "csv": render_grid_csv, "markdown": render_markdown}[args.format]
        sys.stdout.write(render(results))
    else:
        paths = emit_report(results, args.format, args.out)
        _emit({"status": "ok", "files": [str(p) for p in paths]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairboost", description="Fairness pre-processing experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, help="override n_seeds")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--master-seed", type=int, help="override master_seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("transform", help="fit one pre-processor and transform a CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--algo", required=True, choices=(RW, LFR, OP))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help=".csv for transformed rows, .json for the fitted model")
    p.add_argument("--dataset", help="dataset entry of the config (default: the first)")
    p.add_argument("--seed", type=int, help="seed for randomized transforms (default: master_seed)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("evaluate", help="score predictions for fairness and accuracy")
    p.add_argument("--pred", required=True, help="CSV with a 'prediction' column (or one column)")
    p.add_argument("--truth", required=True, help="CSV with a 'label' column (or one column)")
    p.add_argument("--groups", required=True, help="CSV with a 'group' column, 1 = privileged")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a results JSON")
    p.add_argument("--results", required=True)
    p.add_argument("--format", required=True, choices=FORMATS)
    p.add_argument("--out", help="output directory (default: print to stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except (FairboostError, OSError, KeyError, ValueError) as exc:
        code = EXIT_USAGE if isinstance(exc, UsageError) else EXIT_FAILURE
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        sys.stderr.write(json.dumps({"status": "error", "error": type(exc).__name__,
                                     "message": message, "exit_code": code}, sort_keys=True) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
