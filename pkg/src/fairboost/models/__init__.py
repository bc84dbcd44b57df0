"""Weighted binary classifiers and the shared prediction type."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import CONTINUOUS, TabularDataset
from .forest import ForestConfig, ForestModel, Tree, forest_fit
from .logistic import LogisticModel, logreg_fit, weighted_loss

LOGISTIC = "logistic"
FOREST = "forest"
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class Prediction:
    proba: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        proba = np.array(self.proba, dtype=float).reshape(-1)
        labels = np.array(self.labels, dtype=int).reshape(-1)
        proba.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "proba", proba)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_proba(cls, proba, threshold: float = DEFAULT_THRESHOLD) -> "Prediction":
        proba = np.asarray(proba, dtype=float)
        return cls(proba, (proba >= threshold).astype(int))

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class ClassifierSpec:
    """Which classifier to train and with what settings.

    Defaults mirror common library defaults: logistic ``l2_lambda=1.0`` with
    200 Newton iterations; forest of 100 unrestricted-depth trees with
    ``ceil(sqrt(d))`` candidate features per split.
    """

    kind: str = LOGISTIC
    l2_lambda: float = 1.0
    max_iter: int = 200
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.kind not in (LOGISTIC, FOREST):
            raise ValueError(f"unknown classifier kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == LOGISTIC:
            return {"kind": LOGISTIC, "l2_lambda": self.l2_lambda, "max_iter": self.max_iter}
        f = self.forest
        return {"kind": FOREST, "n_trees": f.n_trees, "max_depth": f.max_depth,
                "min_leaf_weight": f.min_leaf_weight, "features_per_split": f.features_per_split}

    @classmethod
    def from_dict(cls, data) -> "ClassifierSpec":
        data = dict(data)
        kind = data.pop("kind", LOGISTIC)
        if kind == FOREST:
            return cls(kind=FOREST, forest=ForestConfig(**data))
        return cls(kind=kind, **data)


def fit_classifier(spec: ClassifierSpec, train: TabularDataset, seed: int = 0):
    """Fit ``spec`` on an encoded dataset, honoring its instance weights."""
    if spec.kind == LOGISTIC:
        continuous = [c.kind == CONTINUOUS for c in train.schema] if train.schema else None
        return logreg_fit(train.X, train.y, train.w, spec.l2_lambda, spec.max_iter,
                          standardize=continuous)
    return forest_fit(train.X, train.y, train.w, spec.forest, seed)


def predict(model, X, threshold: float = DEFAULT_THRESHOLD) -> Prediction:
    """Class-1 probabilities and labels (``proba >= threshold``)."""
    return Prediction.from_proba(model.predict_proba(X), threshold)


def model_from_dict(data):
    if data["type"] == LOGISTIC:
        return LogisticModel.from_dict(data)
    return ForestModel.from_dict(data)


__all__ = [
    "ClassifierSpec", "ForestConfig", "ForestModel", "LogisticModel", "Prediction", "Tree",
    "FOREST", "LOGISTIC", "fit_classifier", "forest_fit", "logreg_fit", "model_from_dict",
    "predict", "weighted_loss",
]
