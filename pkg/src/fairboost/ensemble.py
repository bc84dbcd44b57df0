"""Pre-processor + classifier pipelines and their ensembles.

A pipeline member fits one pre-processor on the shared training split, fits a
classifier on the transformed data, and at prediction time maps raw
(discretized, unencoded) feature rows into the space its classifier saw:

* ``none``, ``rw`` and ``op`` members one-hot encode the raw rows as is;
* ``lfr`` members encode and then replace the rows by their prototype
  reconstruction.

Members combine by majority vote, by majority vote over members trained on
bootstrap resamples of their transformed data (bagging), or by a logistic
meta-model over out-of-fold member probabilities (stacking).

Randomness is keyed by member *name* rather than list position, so member
order never changes a fitted ensemble, and a member fitted inside an ensemble
is identical to the same pipeline fitted alone with the same seed.
"""

from __future__ import annotations

import json
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import ColumnSchema, TabularDataset, encode_onehot
from .errors import DimensionMismatchError, FairboostError
from .models import ClassifierSpec, Prediction, fit_classifier, model_from_dict, predict
from .models.logistic import LogisticModel, logreg_fit
from .preprocess import (
    LFRModel,
    LFRParams,
    OPModel,
    OPParams,
    ReweighingModel,
    lfr_fit,
    lfr_transform,
    op_fit,
    op_transform,
    reweigh_apply,
    reweigh_fit,
)

NONE, RW, LFR, OP = "none", "rw", "lfr", "op"
PREPROCESSORS = (NONE, RW, LFR, OP)
MAJORITY, BAGGING, STACKING = "majority", "bagging", "stacking"
COMBINERS = (MAJORITY, BAGGING, STACKING)

# Stage ids for derived random streams.
STAGE_SPLIT = 0
STAGE_PREPROCESS = 1
STAGE_MODEL = 2
STAGE_BOOTSTRAP = 3
STAGE_FOLDS = 4

N_STACK_FOLDS = 5
META_L2 = 1e-6

# Rows on which majority_vote fell back to the probability tie rule.
TIE_COUNTER = Counter()


class MemberFitError(FairboostError):
    """A pipeline member failed to fit; ``cause`` holds the original error."""

    def __init__(self, member: str, cause: Exception):
        super().__init__(f"member {member!r} failed: {type(cause).__name__}: {cause}")
        self.member = member
        self.cause = cause


def derive_seed(*keys) -> int:
    """Deterministic 32-bit seed from integers and strings."""
    entropy = [k if isinstance(k, int) else zlib.crc32(str(k).encode()) for k in keys]
    return int(np.random.SeedSequence([abs(int(e)) for e in entropy]).generate_state(1)[0])


@dataclass(frozen=True)
class MemberSpec:
    preprocessor: str = NONE
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    lfr: LFRParams = field(default_factory=LFRParams)
    op: OPParams = field(default_factory=OPParams)

    def __post_init__(self):
        if self.preprocessor not in PREPROCESSORS:
            raise ValueError(f"unknown preprocessor {self.preprocessor!r}")

    @property
    def key(self) -> str:
        return self.preprocessor

    def to_dict(self) -> dict:
        out = {"preprocessor": self.preprocessor, "classifier": self.classifier.to_dict()}
        if self.preprocessor == LFR:
            out["lfr"] = dict(self.lfr.__dict__)
        if self.preprocessor == OP:
            out["op"] = self.op.to_dict()
        return out

    def fingerprint(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def preprocessor_fingerprint(self) -> str:
        """Identifies the pre-processing part only (shared across classifiers)."""
        out = self.to_dict()
        out.pop("classifier")
        return json.dumps(out, sort_keys=True)


def _raw_dataset(X, schema) -> TabularDataset:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(schema):
        raise DimensionMismatchError(f"expected {len(schema)} raw feature columns, got shape {X.shape}")
    n = X.shape[0]
    return TabularDataset(X, np.zeros(n, dtype=int), np.zeros(n, dtype=int), None, tuple(schema))


@dataclass(frozen=True, eq=False)
class PipelineMember:
    spec: MemberSpec
    preprocessor_model: object  # None | ReweighingModel | LFRModel | OPModel
    classifier: object
    raw_schema: tuple
    train_summary: dict = field(default_factory=dict)

    def features(self, X_raw) -> np.ndarray:
        """Map raw feature rows into the classifier's input space."""
        ds = X_raw if isinstance(X_raw, TabularDataset) else _raw_dataset(X_raw, self.raw_schema)
        if ds.d != len(self.raw_schema):
            raise DimensionMismatchError(
                f"expected {len(self.raw_schema)} raw feature columns, got {ds.d}")
        enc = encode_onehot(ds.replace(schema=self.raw_schema))
        if self.spec.preprocessor == LFR:
            return lfr_transform(self.preprocessor_model, enc, transform_labels=False).X
        return enc.X

    def predict(self, X_raw) -> Prediction:
        return predict(self.classifier, self.features(X_raw))

    def to_dict(self) -> dict:
        pre = self.preprocessor_model
        return {
            "spec": self.spec.to_dict(),
            "preprocessor_model": None if pre is None else pre.to_dict(),
            "classifier": self.classifier.to_dict(),
            "raw_schema": [c.to_dict() for c in self.raw_schema],
            "train_summary": dict(self.train_summary),
        }

    @classmethod
    def from_dict(cls, data) -> "PipelineMember":
        spec_d = data["spec"]
        kind = spec_d["preprocessor"]
        lfr = LFRParams(**spec_d["lfr"]) if "lfr" in spec_d else LFRParams()
        op = OPParams()
        if "op" in spec_d:
            p = dict(spec_d["op"])
            p.pop("custom_distortion_table", None)
            op = OPParams(**p)
        spec = MemberSpec(kind, ClassifierSpec.from_dict(spec_d["classifier"]), lfr, op)
        pre_d = data["preprocessor_model"]
        loaders = {"reweighing": ReweighingModel, "lfr": LFRModel, "optimized": OPModel}
        pre = None if pre_d is None else loaders[pre_d["type"]].from_dict(pre_d)
        schema = tuple(ColumnSchema.from_dict(c) for c in data["raw_schema"])
        return cls(spec, pre, model_from_dict(data["classifier"]), schema,
                   dict(data.get("train_summary", {})))


def transform_training(train: TabularDataset, spec: MemberSpec, seed: int):
    """Fit the member's pre-processor and return ``(model, encoded training set)``."""
    kind = spec.preprocessor
    if kind == NONE:
        return None, encode_onehot(train)
    if kind == RW:
        model = reweigh_fit(train)
        return model, encode_onehot(reweigh_apply(model, train))
    if kind == OP:
        model = op_fit(train, spec.op)
        return model, encode_onehot(op_transform(model, train, seed))
    encoded = encode_onehot(train)
    model = lfr_fit(encoded, spec.lfr, seed)
    return model, lfr_transform(model, encoded)


def weighted_bootstrap(rng: np.random.Generator, w: np.ndarray):
    """Resample rows with probability proportional to ``w``; the resample gets
    uniform weights carrying the original total mass."""
    n = len(w)
    idx = rng.choice(n, size=n, p=w / w.sum())
    return idx, np.full(n, w.sum() / n)


def fit_member(train: TabularDataset, spec: MemberSpec, seed: int,
               resample: Callable | None = None,
               transform: Callable = transform_training) -> PipelineMember:
    """Fit one pipeline on the raw training split.

    ``resample(rng, w) -> (index, weights)`` replaces the transformed training
    set by a resample before the classifier is fitted (bagging). ``transform``
    may replace :func:`transform_training` (e.g. by a memoized version).
    """
    try:
        pre_model, data = transform(train, spec, derive_seed(seed, STAGE_PREPROCESS, spec.key))
        if resample is not None:
            rng = np.random.default_rng(derive_seed(seed, STAGE_BOOTSTRAP, spec.key))
            idx, w = resample(rng, data.w)
            data = data.subset(idx).replace(w=w)
        clf = fit_classifier(spec.classifier, data, derive_seed(seed, STAGE_MODEL, spec.key))
    except FairboostError as exc:
        raise MemberFitError(spec.key, exc) from exc
    summary = {"n": data.n, "positive_rate": float(data.y.mean()) if data.n else 0.0,
               "weight_sum": float(data.w.sum())}
    return PipelineMember(spec, pre_model, clf, tuple(train.schema), summary)


def majority_vote(member_labels: Sequence, member_probas: Sequence) -> Prediction:
    """Per-row modal label; exact ties go to 1 iff the mean probability is >= 0.5.

    The returned probability is the mean member probability.
    """
    labels = np.asarray([np.asarray(v, dtype=int).reshape(-1) for v in member_labels])
    probas = np.asarray([np.asarray(v, dtype=float).reshape(-1) for v in member_probas])
    if len(labels) < 2:
        raise ValueError("majority vote needs at least two members")
    if labels.shape != probas.shape:
        raise DimensionMismatchError(
            f"label and probability arrays disagree: {labels.shape} vs {probas.shape}")
    m = labels.shape[0]
    ones = labels.sum(axis=0)
    mean_p = probas.mean(axis=0)
    out = (2 * ones > m).astype(int)
    tie = 2 * ones == m
    if tie.any():
        TIE_COUNTER["ties"] += int(tie.sum())
        out[tie] = (mean_p[tie] >= 0.5).astype(int)
    return Prediction(mean_p, out)


def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple
    combiner: str
    meta: LogisticModel | None
    seed: int

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        if self.combiner not in COMBINERS:
            raise ValueError(f"unknown combiner {self.combiner!r}")
        if self.combiner == STACKING and self.meta is None:
            raise ValueError("stacking ensemble has no fitted meta model")

    def to_dict(self) -> dict:
        return {
            "combiner": self.combiner,
            "seed": self.seed,
            "members": [m.to_dict() for m in self.members],
            "meta": None if self.meta is None else self.meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, data) -> "EnsembleModel":
        meta = None if data["meta"] is None else LogisticModel.from_dict(data["meta"])
        return cls(tuple(PipelineMember.from_dict(m) for m in data["members"]), data["combiner"],
                   meta, int(data["seed"]))


def _default_fit(data, spec, seed, resample=None, fold=None):
    return fit_member(data, spec, seed, resample)


def stacking_features(train: TabularDataset, specs: Sequence[MemberSpec], seed: int,
                      fit: Callable | None = None) -> np.ndarray:
    """Out-of-fold member probabilities, shape ``(n, len(specs))``."""
    fit = fit or _default_fit
    folds = stratified_folds(train.y, N_STACK_FOLDS, derive_seed(seed, STAGE_FOLDS))
    out = np.zeros((train.n, len(specs)))
    for f in range(N_STACK_FOLDS):
        held = np.flatnonzero(folds == f)
        if not len(held):
            continue
        rest = np.flatnonzero(folds != f)
        fit_part, held_part = train.subset(rest), train.subset(held)
        for j, spec in enumerate(specs):
            member = fit(fit_part, spec, seed, fold=f)
            out[held, j] = member.predict(held_part).proba
    return out


def ensemble_fit(train: TabularDataset, member_specs: Sequence[MemberSpec], combiner: str = MAJORITY,
                 seed: int = 0, bootstrap: Callable = weighted_bootstrap,
                 fit: Callable | None = None) -> EnsembleModel:
    """Fit every member on ``train`` and combine them.

    ``fit(train, spec, seed, resample=None, fold=None)`` may replace
    :func:`fit_member` (the experiment runner passes a caching wrapper).
    """
    member_specs = list(member_specs)
    if len(member_specs) < 2:
        raise ValueError("an ensemble needs at least two member specs")
    kinds = {s.classifier for s in member_specs}
    if len(kinds) != 1:
        raise ValueError("ensemble members must share one classifier spec")
    if combiner not in COMBINERS:
        raise ValueError(f"unknown combiner {combiner!r}")

    fit = fit or _default_fit
    resample = bootstrap if combiner == BAGGING else None
    members = tuple(fit(train, spec, seed, resample=resample) for spec in member_specs)
    meta = None
    if combiner == STACKING:
        Z = stacking_features(train, member_specs, seed, fit=fit)
        try:
            meta = logreg_fit(Z, train.y, train.w, l2_lambda=META_L2)
        except FairboostError as exc:
            raise MemberFitError("stacking meta model", exc) from exc
    return EnsembleModel(members, combiner, meta, seed)


def ensemble_predict(model: EnsembleModel, X_raw) -> Prediction:
    outputs = [m.predict(X_raw) for m in model.members]
    if model.combiner == STACKING:
        Z = np.column_stack([o.proba for o in outputs])
        return predict(model.meta, Z)
    return majority_vote([o.labels for o in outputs], [o.proba for o in outputs])
