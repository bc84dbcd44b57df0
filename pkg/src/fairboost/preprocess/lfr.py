"""Learning fair representations with prototype memberships.

Each row is softly assigned to ``k`` prototypes (softmax of negative squared
distances). The fitted prototypes minimize

    A_z * L_z + A_x * L_x + A_y * L_y

where ``L_z`` is the summed absolute gap between the mean prototype
memberships of the two groups, ``L_x`` the squared reconstruction error and
``L_y`` the cross-entropy of the membership-weighted prototype label scores.

``smoothing`` (kappa) replaces each ``|g|`` in ``L_z`` by
``sqrt(g^2 + kappa^2) - kappa`` so gradient descent does not stall at the
kinks where a gap crosses zero; ``smoothing=0`` gives the exact absolute value.
``reduction="mean"`` divides ``L_x`` and ``L_y`` by the row count so the
balance against ``L_z`` does not depend on the sample size.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import CONTINUOUS, ColumnSchema, TabularDataset
from ..errors import DimensionMismatchError, DivergenceError, LFRValidationError

U_MIN, U_MAX = 1e-6, 1.0 - 1e-6


@dataclass(frozen=True)
class LFRParams:
    k: int = 20
    A_x: float = 0.01
    A_y: float = 1.0
    A_z: float = 50.0
    max_iter: int = 5000
    step_size: float = 1e-3
    tol: float = 1e-10
    threshold: float = 0.5
    smoothing: float = 1e-4
    reduction: str = "sum"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("LFR needs k >= 1 prototypes")
        if min(self.A_x, self.A_y, self.A_z, self.smoothing) < 0:
            raise ValueError("LFR loss weights must be non-negative")
        if self.reduction not in ("sum", "mean"):
            raise ValueError(f"unknown LFR reduction {self.reduction!r}")


@dataclass(frozen=True, eq=False)
class LFRModel:
    V: np.ndarray  # prototypes, standardized feature space
    u: np.ndarray  # prototype label scores
    params: LFRParams
    mean: np.ndarray
    scale: np.ndarray
    loss_trace: tuple
    terms: dict  # final L_z, L_x, L_y

    @property
    def n_features(self) -> int:
        return self.V.shape[1]

    def memberships(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"LFR model expects {self.n_features} features, got shape {X.shape}")
        return _softmax_memberships((X - self.mean) / self.scale, self.V)

    def to_dict(self) -> dict:
        return {
            "type": "lfr",
            "prototypes": self.V.tolist(),
            "label_scores": self.u.tolist(),
            "params": asdict(self.params),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
            "iterations": len(self.loss_trace) - 1,
            "terms": dict(self.terms),
        }

    @classmethod
    def from_dict(cls, data) -> "LFRModel":
        final = data.get("final_loss")
        return cls(np.asarray(data["prototypes"], dtype=float), np.asarray(data["label_scores"], dtype=float),
                   LFRParams(**data["params"]), np.asarray(data["mean"], dtype=float),
                   np.asarray(data["scale"], dtype=float), () if final is None else (final,),
                   dict(data.get("terms", {})))


def _softmax_memberships(X, V):
    D = ((X[:, None, :] - V[None, :, :]) ** 2).sum(axis=2)
    Z = -D
    Z -= Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def lfr_objective(V, u, X, y, s, counts, params: LFRParams, with_grad: bool = True):
    """Loss, its three terms, and gradients with respect to ``V`` and ``u``.

    ``X`` is standardized; ``counts`` are row multiplicities (all ones for
    unmerged data). Returns ``(loss, (L_z, L_x, L_y), grad_V, grad_u)``.
    """
    diff = X[:, None, :] - V[None, :, :]
    D = (diff ** 2).sum(axis=2)
    Z = -D
    Z -= Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    M = E / E.sum(axis=1, keepdims=True)

    priv = s == 1
    n1 = counts[priv].sum()
    n0 = counts[~priv].sum()
    a = (counts[priv, None] * M[priv]).sum(axis=0) / n1 if n1 else np.zeros(len(u))
    b = (counts[~priv, None] * M[~priv]).sum(axis=0) / n0 if n0 else np.zeros(len(u))
    gap = a - b
    L_z = np.abs(gap).sum()
    kappa = params.smoothing
    smooth = np.sqrt(gap ** 2 + kappa ** 2)

    R = M @ V - X
    L_x = (counts * (R ** 2).sum(axis=1)).sum()

    yhat = M @ u
    L_y = -(counts * (y * np.log(yhat) + (1 - y) * np.log1p(-yhat))).sum()
    # "mean" divides the per-row terms by the row count, so the loss weights
    # keep their balance against L_z at any sample size.
    scale = 1.0 / counts.sum() if params.reduction == "mean" else 1.0
    A_x, A_y = params.A_x * scale, params.A_y * scale
    loss = params.A_z * (smooth - kappa).sum() + A_x * L_x + A_y * L_y
    terms = (float(L_z), float(L_x), float(L_y))
    if not with_grad:
        return loss, terms, None, None

    g_yhat = counts * (-y / yhat + (1 - y) / (1 - yhat))
    sign = gap / smooth if kappa > 0 else np.sign(gap)
    group_w = np.where(priv, counts / n1 if n1 else 0.0, -counts / n0 if n0 else 0.0)

    G = (A_x * 2.0) * (counts[:, None] * (R @ V.T))
    G += A_y * np.outer(g_yhat, u)
    G += params.A_z * np.outer(group_w, sign)

    grad_u = A_y * (M.T @ g_yhat)
    grad_V = (A_x * 2.0) * (M.T @ (counts[:, None] * R))
    # Softmax backward pass, then through Z = -D with dD/dv_k = 2 (v_k - x_n).
    Gz = M * (G - (G * M).sum(axis=1, keepdims=True))
    H = -Gz
    grad_V += 2.0 * (H.sum(axis=0)[:, None] * V - H.T @ X)
    return loss, terms, grad_V, grad_u


def _merge_rows(X, y, s):
    keyed = np.column_stack([X, y, s])
    uniq, inverse, counts = np.unique(keyed, axis=0, return_inverse=True, return_counts=True)
    d = X.shape[1]
    return uniq[:, :d], uniq[:, d], uniq[:, d + 1].astype(int), counts.astype(float)


def lfr_fit(train: TabularDataset, params: LFRParams | None = None, seed: int = 0,
            validate: bool = True) -> LFRModel:
    """Fit prototypes by gradient descent with backtracking.

    A step is accepted only if it lowers the loss (the step is halved until it
    does); after an accepted step the next trial step grows by half. Stops at
    ``params.max_iter`` accepted steps, when no decreasing step exists, or when
    the relative improvement drops below ``params.tol``.

    With ``validate`` a fit whose transformed training labels contain a single
    value raises :class:`LFRValidationError`.
    """
    params = params or LFRParams()
    X = np.asarray(train.X, dtype=float)
    n, d = X.shape
    if params.k > n:
        raise ValueError(f"k={params.k} prototypes exceed the {n} training rows")
    rng = np.random.default_rng(seed)

    Xm, ym, sm, counts = _merge_rows(X, train.y.astype(float), train.s)
    total = counts.sum()
    mean = (counts @ Xm) / total
    scale = np.sqrt((counts @ (Xm - mean) ** 2) / total)
    scale[scale == 0] = 1.0
    Xs = (Xm - mean) / scale

    pick = rng.choice(len(Xm), size=params.k, replace=len(Xm) < params.k, p=counts / total)
    V = Xs[pick] + rng.normal(scale=0.1, size=(params.k, d))
    u = rng.uniform(0.25, 0.75, size=params.k)

    loss, terms, gV, gu = lfr_objective(V, u, Xs, ym, sm, counts, params)
    if not np.isfinite(loss):
        raise DivergenceError("LFR loss is not finite at initialization", 0, params.step_size)
    trace = [float(loss)]
    step = params.step_size
    for it in range(1, params.max_iter + 1):
        accepted = False
        for _ in range(60):
            V_new = V - step * gV
            u_new = np.clip(u - step * gu, U_MIN, U_MAX)
            new_loss, new_terms, _, _ = lfr_objective(V_new, u_new, Xs, ym, sm, counts, params,
                                                      with_grad=False)
            if np.isfinite(new_loss) and new_loss < loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = loss - new_loss
        V, u = V_new, u_new
        loss, terms, gV, gu = lfr_objective(V, u, Xs, ym, sm, counts, params)
        if not (np.isfinite(loss) and np.isfinite(gV).all() and np.isfinite(gu).all()):
            raise DivergenceError(f"LFR diverged at iteration {it} (step size {step:g})", it, step)
        trace.append(float(loss))
        step *= 1.5
        if improvement <= params.tol * max(1.0, abs(loss)):
            break

    model = LFRModel(V, u, params, mean, scale, tuple(trace),
                     {"L_z": terms[0], "L_x": terms[1], "L_y": terms[2]})
    if validate:
        labels = (model.memberships(X) @ u >= params.threshold).astype(int)
        if labels.min() == labels.max():
            raise LFRValidationError(
                f"LFR transformed training labels are all {labels[0]}; adjust its hyperparameters")
    return model


def lfr_transform(model: LFRModel, ds: TabularDataset, transform_labels: bool = True) -> TabularDataset:
    """Replace features by their prototype reconstruction and, optionally,
    labels by ``1[sum_k M_nk u_k >= threshold]``. Weights are unchanged."""
    if ds.n == 0:
        if ds.d != model.n_features:
            raise DimensionMismatchError(f"LFR model expects {model.n_features} features, got {ds.d}")
        return ds
    M = model.memberships(ds.X)
    X_hat = (M @ model.V) * model.scale + model.mean
    schema = tuple(ColumnSchema(c.name, CONTINUOUS, protected=c.protected) for c in ds.schema)
    changes = {"X": X_hat, "schema": schema}
    if transform_labels:
        changes["y"] = (M @ model.u >= model.params.threshold).astype(int)
    return ds.replace(**changes)
