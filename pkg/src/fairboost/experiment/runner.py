"""Grid execution: datasets x models x pipelines x seeds.

Every random choice in a run derives from ``(master_seed, seed_index, stage)``:
the split uses ``derive_seed(master_seed, seed_index, STAGE_SPLIT)`` and every
pipeline fit receives the cell seed ``derive_seed(master_seed, seed_index)``,
from which members derive their own pre-processing, model and bootstrap
streams by member name. Cells therefore share splits (and fitted members)
across pipelines, and results do not depend on execution order or ``jobs``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..dataset import TabularDataset, discretize, load_csv, split
from ..ensemble import (
    NONE,
    STAGE_SPLIT,
    MemberFitError,
    derive_seed,
    ensemble_fit,
    ensemble_predict,
    fit_member,
    transform_training,
)
from ..errors import ConfigError, FairboostError
from ..metrics import MetricReport, evaluate
from ..models import ClassifierSpec
from ..presets import get_preset
from ..stats import SampleSet, compare_conditions, verdict_marker
from .config import DatasetConfig, ExperimentConfig

logger = logging.getLogger(__name__)

SINGLE = "single"
SCHEMA_VERSION = 1
METRICS = ("ndi", "f1")

DESIGN_NOTES = {
    "lfr_training_data": "classifiers train on LFR-transformed features and labels",
    "test_features": "LFR members map test rows through the fitted prototypes; "
                     "RW and OP members use test rows unchanged",
    "ensemble_tie_rule": "on an exact vote tie the label is 1 iff the mean member probability >= 0.5",
    "bagging": "each member's transformed training set is resampled with probability "
               "proportional to its weights",
    "stacking": "logistic meta model on 5-fold out-of-fold member probabilities",
    "seeds": "all cells share the split of each seed index",
    "significance": "Mann-Whitney U at alpha over per-seed values, sidedness from config.two_sided; "
                    "failed seeds excluded",
}


@dataclass(frozen=True)
class Pipeline:
    """One grid column: a model, its pre-processors and how they combine."""

    model: ClassifierSpec
    preprocessors: tuple
    combiner: str = SINGLE

    @property
    def label(self) -> str:
        return f"{self.combiner}:{'+'.join(self.preprocessors)}"


def cell_key(dataset: str, pipeline: Pipeline) -> str:
    return f"{dataset}/{pipeline.model.kind}/{pipeline.label}"


@dataclass
class CellResult:
    dataset: str
    pipeline: Pipeline
    seed_indices: tuple
    reports: list  # MetricReport, or None where the seed failed
    failures: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)

    @property
    def key(self) -> str:
        return cell_key(self.dataset, self.pipeline)

    def values(self, metric: str) -> list:
        return [getattr(r, metric) for r in self.reports if r is not None]

    def mean(self, metric: str) -> float | None:
        vals = self.values(metric)
        return float(np.mean(vals)) if vals else None

    def to_dict(self) -> dict:
        return {
            "cell": self.key,
            "dataset": self.dataset,
            "model": self.pipeline.model.kind,
            "model_spec": self.pipeline.model.to_dict(),
            "combiner": self.pipeline.combiner,
            "pipeline": list(self.pipeline.preprocessors),
            "n_ok": sum(r is not None for r in self.reports),
            "mean_ndi": self.mean("ndi"),
            "mean_f1": self.mean("f1"),
            "seeds": [
                {"seed_index": i, "report": None if r is None else r.to_dict()}
                for i, r in zip(self.seed_indices, self.reports)
            ],
            "failures": list(self.failures),
            "comparisons": list(self.comparisons),
        }


def grid_pipelines(config: ExperimentConfig) -> list[Pipeline]:
    out = []
    for model in config.models:
        out.extend(Pipeline(model, (p,)) for p in config.singles)
        for combiner in config.combiners:
            out.extend(Pipeline(model, tuple(m), combiner) for m in config.ensemble_members)
    return out


_DATA_CACHE: dict = {}


def prepare_dataset(dataset: DatasetConfig, config: ExperimentConfig) -> TabularDataset:
    """Load, optionally subsample, and discretize one dataset (memoized)."""
    key = (dataset.name, dataset.path, dataset.max_rows, config.master_seed, config.bins_per_column)
    if key not in _DATA_CACHE:
        ds = load_csv(dataset.path, get_preset(dataset.name))
        if dataset.max_rows is not None and ds.n > dataset.max_rows:
            rng = np.random.default_rng(derive_seed(config.master_seed, "subsample", dataset.name))
            ds = ds.subset(np.sort(rng.choice(ds.n, size=dataset.max_rows, replace=False)))
        _DATA_CACHE[key] = discretize(ds, config.bins_per_column)
    return _DATA_CACHE[key]


class _MemberCache:
    """Memoizes pre-processing and member fits (and their failures) within one
    (dataset, seed). Pre-processing is shared across classifiers and between
    plain and bagged members."""

    def __init__(self):
        self.members = {}
        self.transforms = {}

    @staticmethod
    def _lookup(store, key, make):
        if key not in store:
            try:
                store[key] = make()
            except FairboostError as exc:
                store[key] = exc
        hit = store[key]
        if isinstance(hit, Exception):
            raise hit
        return hit

    def __call__(self, train, spec, seed, resample=None, fold=None):
        def transform(data, spec_, pre_seed):
            key = (spec_.preprocessor_fingerprint(), pre_seed, fold)
            return self._lookup(self.transforms, key,
                                lambda: transform_training(data, spec_, pre_seed))

        key = (spec.fingerprint(), seed, resample is not None, fold)
        return self._lookup(self.members, key,
                            lambda: fit_member(train, spec, seed, resample, transform))


def _failure(key: str, seed_index: int, exc: Exception) -> dict:
    cause = exc.cause if isinstance(exc, MemberFitError) else exc
    return {
        "cell": key,
        "seed_index": seed_index,
        "member": exc.member if isinstance(exc, MemberFitError) else None,
        "error": type(cause).__name__,
        "message": str(exc),
    }


def _evaluate_pipeline(config, dataset, pipeline, train, test, seed, cache) -> MetricReport:
    specs = [config.member_spec(dataset, pipeline.model, p) for p in pipeline.preprocessors]
    if pipeline.combiner == SINGLE:
        member = cache(train, specs[0], seed)
        return evaluate(member.predict(test), test)
    model = ensemble_fit(train, specs, pipeline.combiner, seed, fit=cache)
    return evaluate(ensemble_predict(model, test), test)


def run_cell(config: ExperimentConfig, dataset: DatasetConfig | str, pipeline: Pipeline,
             seed_index: int, cache=None) -> MetricReport:
    """Split with the seed index's split stream, fit the pipeline, score the test part."""
    if isinstance(dataset, str):
        matches = [d for d in config.datasets if d.name == dataset]
        if not matches:
            raise ConfigError(f"dataset {dataset!r} is not in the config")
        dataset = matches[0]
    data = prepare_dataset(dataset, config)
    pair = split(data, config.train_fraction, derive_seed(config.master_seed, seed_index, STAGE_SPLIT))
    cache = cache or _MemberCache()
    seed = derive_seed(config.master_seed, seed_index)
    return _evaluate_pipeline(config, dataset, pipeline, pair.train, pair.test, seed, cache)


def _run_unit(args):
    """All pipelines of one (dataset, seed index); returns (key, seed, report|None, failure|None)."""
    config, dataset, seed_index = args
    data = prepare_dataset(dataset, config)
    pair = split(data, config.train_fraction, derive_seed(config.master_seed, seed_index, STAGE_SPLIT))
    seed = derive_seed(config.master_seed, seed_index)
    cache = _MemberCache()
    out = []
    for pipeline in grid_pipelines(config):
        key = cell_key(dataset.name, pipeline)
        try:
            report = _evaluate_pipeline(config, dataset, pipeline, pair.train, pair.test, seed, cache)
            out.append((key, seed_index, report.to_dict(), None))
        except FairboostError as exc:
            logger.warning("cell %s seed %d failed: %s", key, seed_index, exc)
            out.append((key, seed_index, None, _failure(key, seed_index, exc)))
    return out


def _compare(baseline: CellResult, treatment: CellResult, alpha: float, table: int,
             two_sided: bool) -> list:
    out = []
    for metric in METRICS:
        entry = {"table": table, "against": baseline.key, "metric": metric}
        a, b = baseline.values(metric), treatment.values(metric)
        if not a or not b:
            entry.update({"skipped": "no successful seeds on one side"})
        else:
            res = compare_conditions(SampleSet(a, metric, baseline.key),
                                     SampleSet(b, metric, treatment.key), alpha, two_sided)
            entry.update(res.to_dict())
            entry["marker"] = verdict_marker(res)
        out.append(entry)
    return out


def attach_comparisons(cells: list[CellResult], alpha: float, two_sided: bool = True) -> None:
    """Fill ``comparisons`` on every cell.

    ``table=1`` comparisons put each single pre-processor against the ``none``
    baseline; ``table=2`` comparisons put each ensemble against each of its
    constituent single pipelines (same dataset and model).
    """
    by_key = {c.key: c for c in cells}
    for cell in cells:
        p = cell.pipeline
        cell.comparisons = []
        if p.combiner == SINGLE and p.preprocessors != (NONE,):
            base = by_key.get(cell_key(cell.dataset, Pipeline(p.model, (NONE,))))
            if base is not None:
                cell.comparisons = _compare(base, cell, alpha, 1, two_sided)
        elif p.combiner != SINGLE:
            for pre in p.preprocessors:
                single = by_key.get(cell_key(cell.dataset, Pipeline(p.model, (pre,))))
                if single is not None:
                    cell.comparisons.extend(_compare(single, cell, alpha, 2, two_sided))


def run_grid(config: ExperimentConfig, jobs: int = 1) -> list[CellResult]:
    """Run every cell for every seed index, then attach baseline comparisons
    (see :func:`attach_comparisons`)."""
    names = [d.name for d in config.datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate dataset names in config: {names}")
    kinds = [m.kind for m in config.models]
    if len(set(kinds)) != len(kinds):
        raise ConfigError(f"each model kind may appear once: {kinds}")
    units = [(config, d, i) for d in config.datasets for i in range(config.n_seeds)]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = [r for chunk in pool.map(_run_unit, units) for r in chunk]
    else:
        rows = [r for u in units for r in _run_unit(u)]

    by_key = {}
    for d in config.datasets:
        for pipeline in grid_pipelines(config):
            res = CellResult(d.name, pipeline, tuple(range(config.n_seeds)), [None] * config.n_seeds)
            by_key[res.key] = res
    for key, seed_index, report, failure in rows:
        cell = by_key[key]
        if report is not None:
            cell.reports[seed_index] = MetricReport.from_dict(report)
        else:
            cell.failures.append(failure)
    for cell in by_key.values():
        cell.failures.sort(key=lambda f: f["seed_index"])

    attach_comparisons(list(by_key.values()), config.alpha, config.two_sided)
    return [by_key[k] for k in sorted(by_key)]


def results_to_dict(config: ExperimentConfig, cells: list[CellResult]) -> dict:
    failures = sorted((f for c in cells for f in c.failures),
                      key=lambda f: (f["cell"], f["seed_index"]))
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "seeds": [
            {"seed_index": i, "split_seed": derive_seed(config.master_seed, i, STAGE_SPLIT),
             "cell_seed": derive_seed(config.master_seed, i)}
            for i in range(config.n_seeds)
        ],
        "design": dict(DESIGN_NOTES),
        "cells": [c.to_dict() for c in cells],
        "failures": failures,
        "summary": {
            "n_cells": len(cells),
            "n_reports": sum(c.to_dict()["n_ok"] for c in cells),
            "n_failures": len(failures),
        },
    }
