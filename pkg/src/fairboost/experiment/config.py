"""Experiment configuration read from a YAML file.

Top-level keys (all optional except ``datasets``)::

    master_seed: 0
    n_seeds: 10
    train_fraction: 0.7
    alpha: 0.05
    two_sided: true             # false: one-sided test in the observed direction
    bins_per_column: 4          # quantile bins for continuous columns without fixed edges
    datasets:
      - name: german            # preset name
        path: german.csv        # relative to the config file; defaults to the preset file
        max_rows: null          # deterministic row subsample cap
        lfr: {reduction: mean}  # per-dataset overrides of the global sections
        op: {}
    lfr: {k: 20, A_x: 0.01, A_y: 1.0, A_z: 50.0, max_iter: 5000}
    op: {epsilon: 0.05, distortion_cap: 0.5}
    models:
      - {kind: logistic, l2_lambda: 1.0}
      - {kind: forest, n_trees: 100}
    singles: [none, rw, lfr, op]
    ensembles:
      combiners: [majority, bagging, stacking]
      members: [[lfr, op], [lfr, rw], [rw, op], [lfr, rw, op]]
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..ensemble import COMBINERS, LFR, NONE, OP, PREPROCESSORS, MemberSpec
from ..errors import ConfigError
from ..models import ClassifierSpec
from ..preprocess import LFRParams, OPParams
from ..presets import DEFAULT_FILES, PRESETS

DEFAULT_DATA_DIR = "data"


def _params(cls, data, where):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return dict(data)


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    path: str
    max_rows: int | None = None
    lfr: LFRParams = field(default_factory=LFRParams)
    op: OPParams = field(default_factory=OPParams)

    def to_dict(self) -> dict:
        return {"name": self.name, "path": self.path, "max_rows": self.max_rows,
                "lfr": dict(self.lfr.__dict__), "op": self.op.to_dict()}


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    models: tuple = (ClassifierSpec("logistic"), ClassifierSpec("forest"))
    singles: tuple = PREPROCESSORS
    combiners: tuple = ()
    ensemble_members: tuple = ()
    n_seeds: int = 10
    train_fraction: float = 0.7
    alpha: float = 0.05
    two_sided: bool = True
    master_seed: int = 0
    bins_per_column: int = 4

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        if NONE not in self.singles:
            raise ConfigError("singles must include the 'none' baseline pipeline")
        for combo in self.ensemble_members:
            missing = [p for p in combo if p not in self.singles]
            if missing:
                raise ConfigError(f"ensemble {list(combo)} uses pipelines not in singles: {missing}")

    def with_overrides(self, n_seeds=None, master_seed=None) -> "ExperimentConfig":
        changes = {}
        if n_seeds is not None:
            changes["n_seeds"] = int(n_seeds)
        if master_seed is not None:
            changes["master_seed"] = int(master_seed)
        return type(self)(**{**self.__dict__, **changes})

    def member_spec(self, dataset: DatasetConfig, model: ClassifierSpec, preprocessor: str) -> MemberSpec:
        return MemberSpec(preprocessor, model,
                          dataset.lfr if preprocessor == LFR else LFRParams(),
                          dataset.op if preprocessor == OP else OPParams())

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "n_seeds": self.n_seeds,
            "train_fraction": self.train_fraction,
            "alpha": self.alpha,
            "two_sided": self.two_sided,
            "bins_per_column": self.bins_per_column,
            "datasets": [d.to_dict() for d in self.datasets],
            "models": [m.to_dict() for m in self.models],
            "singles": list(self.singles),
            "ensembles": {"combiners": list(self.combiners),
                          "members": [list(m) for m in self.ensemble_members]},
        }


def _dataset(entry, base: Path, lfr_base: dict, op_base: dict) -> DatasetConfig:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"dataset entry needs a 'name': {entry!r}")
    unknown = sorted(set(entry) - {"name", "path", "max_rows", "lfr", "op"})
    if unknown:
        raise ConfigError(f"dataset {entry['name']!r}: unknown keys {unknown}")
    name = entry["name"]
    if name not in PRESETS:
        raise ConfigError(f"unknown dataset preset {name!r}; known: {sorted(PRESETS)}")
    path = entry.get("path") or str(Path(DEFAULT_DATA_DIR) / DEFAULT_FILES[name])
    path = Path(path)
    if not path.is_absolute():
        path = base / path
    lfr = {**lfr_base, **_params(LFRParams, entry.get("lfr"), f"datasets.{name}.lfr")}
    op = {**op_base, **_params(OPParams, entry.get("op"), f"datasets.{name}.op")}
    max_rows = entry.get("max_rows")
    try:
        return DatasetConfig(name, str(path), None if max_rows is None else int(max_rows),
                             LFRParams(**lfr), OPParams(**op))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dataset {name!r}: {exc}") from exc


def _model(entry) -> ClassifierSpec:
    if isinstance(entry, str):
        entry = {"kind": entry}
    try:
        return ClassifierSpec.from_dict(entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model {entry!r}: {exc}") from exc


def config_from_dict(data: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    allowed = {"master_seed", "n_seeds", "train_fraction", "alpha", "two_sided", "bins_per_column",
               "datasets",
               "lfr", "op", "models", "singles", "ensembles"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    base = Path(base_dir)
    lfr_base = _params(LFRParams, data.get("lfr"), "lfr")
    op_base = _params(OPParams, data.get("op"), "op")
    datasets = tuple(_dataset(e, base, lfr_base, op_base) for e in data.get("datasets") or ())

    kwargs = {"datasets": datasets}
    if "models" in data:
        kwargs["models"] = tuple(_model(m) for m in data["models"])
    if "singles" in data:
        singles = tuple(data["singles"])
        bad = [p for p in singles if p not in PREPROCESSORS]
        if bad:
            raise ConfigError(f"unknown preprocessors {bad}; known: {list(PREPROCESSORS)}")
        kwargs["singles"] = singles
    ens = data.get("ensembles") or {}
    combiners = tuple(ens.get("combiners", ()))
    bad = [c for c in combiners if c not in COMBINERS]
    if bad:
        raise ConfigError(f"unknown combiners {bad}; known: {list(COMBINERS)}")
    members = tuple(tuple(m) for m in ens.get("members", ()))
    for m in members:
        if len(m) < 2:
            raise ConfigError(f"ensemble {list(m)} needs at least two members")
    kwargs["combiners"] = combiners
    kwargs["ensemble_members"] = members
    for key, cast in (("n_seeds", int), ("train_fraction", float), ("alpha", float),
                      ("master_seed", int), ("bins_per_column", int)):
        if key in data:
            kwargs[key] = cast(data[key])
    if "two_sided" in data:
        if not isinstance(data["two_sided"], bool):
            raise ConfigError("two_sided must be true or false")
        kwargs["two_sided"] = data["two_sided"]
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data or {}, base_dir=path.parent)
