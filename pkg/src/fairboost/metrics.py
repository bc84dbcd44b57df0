"""Disparate impact, normalized disparate impact and F1."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatchError

BOTH_RATES_ZERO = "di_both_rates_zero"
PRIVILEGED_RATE_ZERO = "di_privileged_rate_zero"
F1_DEGENERATE = "f1_no_positives"


@dataclass(frozen=True)
class GroupOutcomeCounts:
    n_unprivileged: int
    n_privileged: int
    pos_unprivileged: int
    pos_privileged: int
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    di: float
    ndi: float
    f1: float
    accuracy: float
    counts: GroupOutcomeCounts
    edge_flags: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["di"] = _json_float(self.di)
        out["edge_flags"] = list(self.edge_flags)
        return out

    @classmethod
    def from_dict(cls, data) -> "MetricReport":
        di = data["di"]
        return cls(
            di=math.inf if di == "inf" else float(di),
            ndi=float(data["ndi"]),
            f1=float(data["f1"]),
            accuracy=float(data["accuracy"]),
            counts=GroupOutcomeCounts(**data["counts"]),
            edge_flags=tuple(data.get("edge_flags", ())),
        )


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


def _binary(v, name) -> np.ndarray:
    a = np.asarray(v).astype(int).reshape(-1)
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return a


def _group_rates(pred, groups):
    pred = _binary(pred, "pred_labels")
    groups = _binary(groups, "groups")
    if len(pred) != len(groups):
        raise DimensionMismatchError(f"{len(pred)} predictions but {len(groups)} group entries")
    n_u = int((groups == 0).sum())
    n_p = int((groups == 1).sum())
    if n_u == 0 or n_p == 0:
        missing = "unprivileged" if n_u == 0 else "privileged"
        raise ValueError(f"the {missing} group is absent")
    pos_u = int(pred[groups == 0].sum())
    pos_p = int(pred[groups == 1].sum())
    return n_u, n_p, pos_u, pos_p


def _di_from_counts(n_u, n_p, pos_u, pos_p):
    rate_u = pos_u / n_u
    rate_p = pos_p / n_p
    if rate_p == 0.0:
        if rate_u == 0.0:
            return 1.0, (BOTH_RATES_ZERO,)
        return math.inf, (PRIVILEGED_RATE_ZERO,)
    return rate_u / rate_p, ()


def disparate_impact(pred_labels, groups, return_flags: bool = False):
    """Positive-prediction rate of the unprivileged group (0) over that of the
    privileged group (1).

    0/0 resolves to 1 and k/0 to +inf; both cases are flagged.
    """
    di, flags = _di_from_counts(*_group_rates(pred_labels, groups))
    return (di, flags) if return_flags else di


def normalize_di(di: float) -> float:
    """Fold DI into [0, 1]: DI when DI <= 1, else 1/DI (+inf -> 0)."""
    if math.isnan(di) or di < 0:
        raise ValueError(f"disparate impact must be non-negative, got {di}")
    if di <= 1.0:
        return float(di)
    return 0.0 if math.isinf(di) else 1.0 / di


def _confusion(pred, truth):
    pred = _binary(pred, "pred_labels")
    truth = _binary(truth, "true_labels")
    if len(pred) != len(truth):
        raise DimensionMismatchError(f"{len(pred)} predictions but {len(truth)} labels")
    tp = int(((pred == 1) & (truth == 1)).sum())
    fp = int(((pred == 1) & (truth == 0)).sum())
    fn = int(((pred == 0) & (truth == 1)).sum())
    tn = int(((pred == 0) & (truth == 0)).sum())
    return tp, fp, fn, tn


def _f1_from_counts(tp, fp, fn):
    if tp == fp == fn == 0:
        return 0.0, (F1_DEGENERATE,)
    return tp / (tp + 0.5 * (fp + fn)), ()


def f1_score(pred_labels, true_labels, return_flags: bool = False):
    tp, fp, fn, _ = _confusion(pred_labels, true_labels)
    f1, flags = _f1_from_counts(tp, fp, fn)
    return (f1, flags) if return_flags else f1


def evaluate(pred, test) -> MetricReport:
    """Score predicted labels against a test dataset.

    ``pred`` may be a :class:`~fairboost.models.Prediction` or a label vector;
    ``test`` provides true labels ``y`` and groups ``s``.
    """
    labels = getattr(pred, "labels", pred)
    n_u, n_p, pos_u, pos_p = _group_rates(labels, test.s)
    tp, fp, fn, tn = _confusion(labels, test.y)
    di, di_flags = _di_from_counts(n_u, n_p, pos_u, pos_p)
    f1, f1_flags = _f1_from_counts(tp, fp, fn)
    counts = GroupOutcomeCounts(n_u, n_p, pos_u, pos_p, tp, fp, fn, tn)
    return MetricReport(
        di=di,
        ndi=normalize_di(di),
        f1=f1,
        accuracy=(tp + tn) / counts.n,
        counts=counts,
        edge_flags=di_flags + f1_flags,
    )
