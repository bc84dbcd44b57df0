"""Reweighing: per-(group, label) instance weights that make the label
statistically independent of the protected attribute in the weighted data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import TabularDataset
from ..errors import UnfittableError

CELLS = ((1, 1), (1, 0), (0, 1), (0, 0))


@dataclass(frozen=True)
class ReweighingModel:
    """``weight_table[(s, y)] = n_s * n_y / (n * n_sy)``, counts taken with the
    fitting data's instance weights."""

    weight_table: dict

    def weight(self, s: int, y: int) -> float:
        return self.weight_table[(int(s), int(y))]

    def to_dict(self) -> dict:
        return {
            "type": "reweighing",
            "weights": [{"s": s, "y": y, "weight": self.weight_table[(s, y)]} for s, y in CELLS],
        }

    @classmethod
    def from_dict(cls, data) -> "ReweighingModel":
        return cls({(int(e["s"]), int(e["y"])): float(e["weight"]) for e in data["weights"]})


def reweigh_fit(train: TabularDataset) -> ReweighingModel:
    w = train.w
    n = w.sum()
    table = {}
    for s, y in CELLS:
        n_sy = w[(train.s == s) & (train.y == y)].sum()
        if n_sy == 0:
            group = "privileged" if s == 1 else "unprivileged"
            raise UnfittableError(f"reweighing: empty cell (s={s}, y={y}) [{group}, label {y}]")
        n_s = w[train.s == s].sum()
        n_y = w[train.y == y].sum()
        table[(s, y)] = float(n_s * n_y / (n * n_sy))
    return ReweighingModel(table)


def reweigh_apply(model: ReweighingModel, ds: TabularDataset) -> TabularDataset:
    """Copy of ``ds`` with ``w_i = weight_table[(s_i, y_i)]``."""
    lookup = np.array([[model.weight(0, 0), model.weight(0, 1)],
                       [model.weight(1, 0), model.weight(1, 1)]])
    return ds.replace(w=lookup[ds.s, ds.y])
