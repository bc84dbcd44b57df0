"""Optimized pre-processing: a randomized map of (features, label) cells.

For each protected group ``s`` the fitted table ``T_s[i, j]`` is the
probability of sending a training row in source cell ``i`` to cell ``j``.
The fit minimizes the per-group total-variation distance between the
empirical cell distribution and its image under ``T``, subject to

* discrimination control ``|P_T(y=1 | s) / P_T(y=1) - 1| <= epsilon`` for both groups,
* per-cell distortion ``E_T[distortion | source cell] <= cap``,
* every row of ``T`` lying on the probability simplex.

The default solver is projected gradient descent on the row simplices driven
by an augmented Lagrangian, with a feasibility-repair pass and best-feasible
iterate selection over a fixed iteration budget. All constraints are linear
in ``T``, so ``solver="highs"`` instead solves the equivalent sparse linear
program exactly. Whether the constraints can be met at all is decided up
front in closed form, which gives a readable error naming the constraint that
cannot hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..dataset import BINARY, CATEGORICAL, TabularDataset
from ..errors import DatasetError, DomainTooLargeError, InfeasibleError, UnseenCategoryError
from .simplex import project_rows

DISCRIMINATION = "discrimination"
DISTORTION = "distortion"


@dataclass(frozen=True)
class OPParams:
    """``distortion_table`` (cells x cells, cell = 2 * feature_index + label)
    overrides the default distortion ``label_cost * [label flips] +
    feature_cost * (fraction of feature columns changed)``.

    ``distortion_weight`` adds that multiple of the expected distortion to the
    objective; it breaks ties among equally faithful maps in favour of small
    edits and does not change the constraints.
    """

    epsilon: float = 0.05
    distortion_cap: float = 0.5
    label_cost: float = 1.0
    feature_cost: float = 1.0
    distortion_table: np.ndarray | None = field(default=None, compare=False, repr=False)
    distortion_weight: float = 1e-3
    solver: str = "pgd"
    max_iter: int = 3000
    inner_steps: int = 25
    step_size: float = 0.05
    penalty: float = 10.0
    max_penalty: float = 1e4
    max_cells: int = 10_000
    tol: float = 1e-4

    def __post_init__(self):
        if min(self.epsilon, self.distortion_cap, self.label_cost, self.feature_cost,
               self.distortion_weight) < 0:
            raise ValueError("OP constraint parameters must be non-negative")
        if self.solver not in ("pgd", "highs"):
            raise ValueError(f"unknown OP solver {self.solver!r}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "distortion_cap": self.distortion_cap,
            "label_cost": self.label_cost,
            "feature_cost": self.feature_cost,
            "custom_distortion_table": self.distortion_table is not None,
            "distortion_weight": self.distortion_weight,
            "solver": self.solver,
            "max_iter": self.max_iter,
            "inner_steps": self.inner_steps,
            "step_size": self.step_size,
            "penalty": self.penalty,
            "max_penalty": self.max_penalty,
            "max_cells": self.max_cells,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class OPDomain:
    """Enumerated (features, label) cells over the non-protected columns."""

    columns: tuple  # column names
    column_index: tuple  # positions in the dataset's X
    radices: tuple

    @property
    def n_x(self) -> int:
        return int(np.prod(self.radices, dtype=np.int64)) if self.radices else 1

    @property
    def n_cells(self) -> int:
        return 2 * self.n_x

    @classmethod
    def from_dataset(cls, ds: TabularDataset, max_cells: int = 10_000) -> "OPDomain":
        names, index, radices = [], [], []
        for j, col in enumerate(ds.schema):
            if col.protected:
                continue
            if col.kind == CATEGORICAL:
                radices.append(len(col.categories))
            elif col.kind == BINARY:
                radices.append(2)
            else:
                raise DatasetError(
                    f"optimized pre-processing needs discrete features; discretize {col.name!r} first")
            names.append(col.name)
            index.append(j)
        cells = 2 * math.prod(radices)
        if cells > max_cells:
            raise DomainTooLargeError(
                f"feature domain has {cells} cells, above the limit of {max_cells}")
        return cls(tuple(names), tuple(index), tuple(radices))

    def cells(self, ds: TabularDataset) -> np.ndarray:
        if not self.column_index:
            return ds.y.astype(np.int64)
        codes = ds.X[:, list(self.column_index)]
        icodes = codes.astype(np.int64)
        bad = (icodes != codes) | (icodes < 0) | (icodes >= np.asarray(self.radices))
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            raise UnseenCategoryError(f"row {row} has a feature value outside the fitted domain")
        x_index = np.ravel_multi_index(icodes.T, self.radices)
        return x_index * 2 + ds.y.astype(np.int64)

    def digits(self) -> np.ndarray:
        """Feature codes of every feature index, shape (n_x, n_columns)."""
        if not self.radices:
            return np.zeros((1, 0), dtype=np.int64)
        return np.stack(np.unravel_index(np.arange(self.n_x), self.radices), axis=1)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "column_index": list(self.column_index),
                "radices": list(self.radices)}


@dataclass(frozen=True, eq=False)
class OPModel:
    domain: OPDomain
    params: OPParams
    sources: tuple  # per group: observed source cells, shape (R_s,)
    tables: tuple  # per group: T_s, shape (R_s, n_cells)
    report: dict

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def distortion_cap(self) -> float:
        return self.params.distortion_cap

    def row(self, s: int, cell: int) -> np.ndarray:
        """Transition distribution of ``cell`` in group ``s`` (a point mass on
        the cell itself for cells unseen during fitting)."""
        hit = np.flatnonzero(self.sources[s] == cell)
        if len(hit):
            return self.tables[s][hit[0]]
        out = np.zeros(self.domain.n_cells)
        out[cell] = 1.0
        return out

    def to_dict(self) -> dict:
        groups = []
        for s in (0, 1):
            rows = []
            for src, row in zip(self.sources[s], self.tables[s]):
                nz = np.flatnonzero(row > 0)
                rows.append({"source": int(src), "targets": nz.tolist(), "probs": row[nz].tolist()})
            groups.append({"s": s, "rows": rows})
        return {"type": "optimized", "domain": self.domain.to_dict(), "params": self.params.to_dict(),
                "groups": groups, "constraint_report": self.report}

    @classmethod
    def from_dict(cls, data) -> "OPModel":
        d = data["domain"]
        domain = OPDomain(tuple(d["columns"]), tuple(d["column_index"]), tuple(d["radices"]))
        p = dict(data["params"])
        p.pop("custom_distortion_table", None)
        params = OPParams(**p)
        sources, tables = [], []
        for g in sorted(data["groups"], key=lambda g: g["s"]):
            src = np.array([r["source"] for r in g["rows"]], dtype=np.int64)
            T = np.zeros((len(src), domain.n_cells))
            for i, r in enumerate(g["rows"]):
                T[i, r["targets"]] = r["probs"]
            sources.append(src)
            tables.append(T)
        return cls(domain, params, tuple(sources), tuple(tables), dict(data["constraint_report"]))


# ---------------------------------------------------------------------------
# Problem data


@dataclass
class _Group:
    p: float  # group share
    sources: np.ndarray  # (R,)
    q: np.ndarray  # (R,) source distribution within the group
    Q: np.ndarray  # (C,) same, over all cells
    delta: np.ndarray  # (R, C) distortion
    base_rate: float


def _distortion_rows(domain: OPDomain, sources: np.ndarray, params: OPParams) -> np.ndarray:
    C = domain.n_cells
    if params.distortion_table is not None:
        table = np.asarray(params.distortion_table, dtype=float)
        if table.shape != (C, C):
            raise ValueError(f"distortion table must be {C}x{C}, got {table.shape}")
        if (table < 0).any():
            raise ValueError("distortion values must be non-negative")
        return table[sources]
    digits = domain.digits()
    src_x, src_y = sources // 2, sources % 2
    n_cols = max(1, digits.shape[1])
    hamming = (digits[src_x][:, None, :] != digits[None, :, :]).sum(axis=2) / n_cols  # (R, n_x)
    feat = np.repeat(hamming, 2, axis=1)  # target cell j -> feature index j // 2
    flips = (src_y[:, None] != (np.arange(C) % 2)[None, :]).astype(float)
    return params.label_cost * flips + params.feature_cost * feat


def _groups(train: TabularDataset, domain: OPDomain, params: OPParams) -> list[_Group]:
    cells = domain.cells(train)
    total = train.w.sum()
    C = domain.n_cells
    out = []
    for s in (0, 1):
        mask = train.s == s
        if not mask.any():
            raise InfeasibleError(f"group s={s} is absent from the training data", DISCRIMINATION)
        Q = np.bincount(cells[mask], weights=train.w[mask], minlength=C)
        Q /= Q.sum()
        sources = np.flatnonzero(Q > 0)
        out.append(_Group(train.w[mask].sum() / total, sources, Q[sources], Q,
                          _distortion_rows(domain, sources, params), float(Q[1::2].sum())))
    return out


def _identity(g: _Group, C: int) -> np.ndarray:
    T = np.zeros((len(g.sources), C))
    T[np.arange(len(g.sources)), g.sources] = 1.0
    return T


def _rates(tables, groups):
    r = [float(g.q @ T[:, 1::2].sum(axis=1)) for g, T in zip(groups, tables)]
    overall = sum(g.p * rs for g, rs in zip(groups, r))
    return r, overall


def _tv(tables, groups) -> float:
    return float(sum(g.p * 0.5 * np.abs(g.q @ T - g.Q).sum() for g, T in zip(groups, tables)))


def _expected_distortion(tables, groups) -> float:
    return float(sum(g.p * g.q @ (T * g.delta).sum(axis=1) for g, T in zip(groups, tables)))


def _violations(tables, groups, params):
    r, overall = _rates(tables, groups)
    if overall > 0:
        disc = max(abs(rs / overall - 1.0) for rs in r) - params.epsilon
    else:
        disc = 0.0 - params.epsilon  # no positives anywhere: both ratios read as parity
    dist = max(float(((T * g.delta).sum(axis=1) - params.distortion_cap).max())
               for g, T in zip(groups, tables))
    simplex = max(max(float(np.abs(T.sum(axis=1) - 1).max()), float(-T.min()))
                  for T in tables)
    return disc, dist, simplex


# ---------------------------------------------------------------------------
# Feasibility


def _ratio_interval(p0: float, p1: float, eps: float):
    """Range of r1 / r0 satisfying both discrimination constraints (r0 > 0)."""
    lo, hi = 0.0, math.inf
    if p1 > 0:
        lo = max(lo, (1.0 / (1.0 + eps) - p0) / p1)
        if eps < 1:
            hi = min(hi, (1.0 / (1.0 - eps) - p0) / p1)
    lo = max(lo, p0 * (1.0 - eps) / (1.0 - p1 * (1.0 - eps)) if eps < 1 else 0.0)
    if 1.0 - p1 * (1.0 + eps) > 0:
        hi = min(hi, p0 * (1.0 + eps) / (1.0 - p1 * (1.0 + eps)))
    return lo, hi


def _rate_box(g: _Group, C: int, cap: float):
    """Smallest and largest positive rate group ``g`` can reach.

    Only label flips move the rate, and a source cell can flip at most
    ``cap / (cheapest flip distortion)`` of its mass.
    """
    flipped = (g.sources[:, None] % 2) != (np.arange(C)[None, :] % 2)
    cheapest = np.where(flipped, g.delta, np.inf).min(axis=1)
    with np.errstate(divide="ignore"):
        qmax = np.where(cheapest > 0, np.minimum(1.0, cap / cheapest), 1.0)
    pos = g.sources % 2 == 1
    return (g.base_rate - float(g.q[pos] @ qmax[pos]),
            g.base_rate + float(g.q[~pos] @ qmax[~pos]))


def check_feasible(groups, params, C) -> None:
    """Raise :class:`InfeasibleError` unless some table meets every constraint."""
    (lo0, hi0), (lo1, hi1) = (_rate_box(g, C, params.distortion_cap) for g in groups)
    rlo, rhi = _ratio_interval(groups[0].p, groups[1].p, params.epsilon)
    if hi0 <= 0:
        raise InfeasibleError(
            "discrimination control cannot be met: the unprivileged group cannot receive any "
            f"positive labels within distortion cap {params.distortion_cap}", DISCRIMINATION)
    box_lo = lo1 / hi0
    box_hi = hi1 / lo0 if lo0 > 0 else math.inf
    if max(rlo, box_lo) > min(rhi, box_hi) + 1e-12:
        raise InfeasibleError(
            f"discrimination control (epsilon={params.epsilon}) cannot be met within distortion "
            f"cap {params.distortion_cap}: achievable positive-rate ratio range "
            f"[{box_lo:.4g}, {box_hi:.4g}] misses the required [{rlo:.4g}, {rhi:.4g}]",
            DISCRIMINATION)


# ---------------------------------------------------------------------------
# Solvers


def _linear_program(groups, params, C):
    """Sparse LP over ``[vec(T_0), vec(T_1), d_0, d_1]`` with ``d_s >= |q_s T_s - Q_s|``."""
    sizes = [len(g.sources) * C for g in groups]
    t_off = [0, sizes[0]]
    d_off = [sizes[0] + sizes[1], sizes[0] + sizes[1] + C]
    n_var = d_off[1] + C

    cost = np.zeros(n_var)
    eq_blocks, ub_blocks, b_ub = [], [], []
    rate_rows = []
    for g, to, do in zip(groups, t_off, d_off):
        R = len(g.sources)
        cost[to:to + R * C] = params.distortion_weight * g.p * (g.q[:, None] * g.delta).ravel()
        cost[do:do + C] = 0.5 * g.p

        def place(block, offset):
            block = sp.coo_matrix(block)
            return sp.coo_matrix((block.data, (block.row, block.col + offset)),
                                 shape=(block.shape[0], n_var))

        eq_blocks.append(place(sp.kron(sp.eye(R), np.ones((1, C))), to))
        rows = np.repeat(np.arange(R), C)
        ub_blocks.append(place(sp.csr_matrix((g.delta.ravel(), (rows, np.arange(R * C))),
                                             shape=(R, R * C)), to))
        b_ub.append(np.full(R, params.distortion_cap))
        mix = sp.kron(g.q.reshape(1, -1), sp.eye(C))  # (C, R*C): q_s^T T_s
        neg_eye = -sp.eye(C)
        ub_blocks.append(place(mix, to) + place(neg_eye, do))
        b_ub.append(g.Q)
        ub_blocks.append(place(-mix, to) + place(neg_eye, do))
        b_ub.append(-g.Q)
        rate = np.zeros(n_var)
        rate[to:to + R * C] = (g.q[:, None] * (np.arange(C) % 2 == 1)[None, :]).ravel()
        rate_rows.append(rate)

    eps = params.epsilon
    overall = groups[0].p * rate_rows[0] + groups[1].p * rate_rows[1]
    disc = np.array([r - (1 + eps) * overall for r in rate_rows]
                    + [(1 - eps) * overall - r for r in rate_rows])
    ub_blocks.append(sp.csr_matrix(disc))
    b_ub.append(np.zeros(4))
    A_eq = sp.vstack(eq_blocks).tocsr()
    b_eq = np.ones(A_eq.shape[0])
    return cost, sp.vstack(ub_blocks).tocsr(), np.concatenate(b_ub), A_eq, b_eq, t_off


def _reference_point(groups, params, C):
    """A feasible label-flip-only table set.

    Aims at the middle of the achievable rates so the point is interior
    whenever the feasible set has an interior. Assumes :func:`check_feasible`
    passed.
    """
    boxes = [_rate_box(g, C, params.distortion_cap) for g in groups]
    (lo0, hi0), (lo1, hi1) = boxes
    rlo, rhi = _ratio_interval(groups[0].p, groups[1].p, params.epsilon)
    lo = max(rlo, lo1 / hi0)
    hi = min(rhi, hi1 / lo0 if lo0 > 0 else math.inf)
    ratio = min(max(1.0, lo), hi)
    r0 = 0.5 * (max(lo0, lo1 / ratio) + min(hi0, hi1 / ratio))
    tables = []
    for g, (blo, bhi), want in zip(groups, boxes, (r0, ratio * r0)):
        T = _identity(g, C)
        flipped = (g.sources[:, None] % 2) != (np.arange(C)[None, :] % 2)
        cost = np.where(flipped, g.delta, np.inf)
        target = cost.argmin(axis=1)
        cheapest = cost[np.arange(len(target)), target]
        with np.errstate(divide="ignore"):
            qmax = np.where(cheapest > 0, np.minimum(1.0, params.distortion_cap / cheapest), 1.0)
        pos = g.sources % 2 == 1
        if want > g.base_rate:
            rows, frac = np.flatnonzero(~pos), (want - g.base_rate) / (bhi - g.base_rate)
        elif want < g.base_rate:
            rows, frac = np.flatnonzero(pos), (g.base_rate - want) / (g.base_rate - blo)
        else:
            rows, frac = np.zeros(0, dtype=int), 0.0
        f = frac * qmax[rows]
        T[rows, g.sources[rows]] -= f
        T[rows, target[rows]] += f
        tables.append(T)
    return tables


def _relabel(T: np.ndarray, current: float, target: float) -> None:
    """Shift label mass between paired cells (same features) to move the rate."""
    if target > current and current < 1:
        moved = (target - current) / (1.0 - current) * T[:, 0::2]
        T[:, 0::2] -= moved
        T[:, 1::2] += moved
    elif target < current and current > 0:
        moved = (current - target) / current * T[:, 1::2]
        T[:, 1::2] -= moved
        T[:, 0::2] += moved


def _repair(tables, groups, params, rounds: int = 50):
    """Alternate a distortion fix (mix violating rows towards their own cell)
    and a discrimination fix (uniform relabeling within each group) until both
    constraints hold; ``None`` if they still fail after ``rounds``."""
    tables = [np.clip(T, 0.0, None) for T in tables]
    tables = [T / T.sum(axis=1, keepdims=True) for T in tables]
    p0, p1 = groups[0].p, groups[1].p
    rlo, rhi = _ratio_interval(p0, p1, max(params.epsilon - 1e-9, 0.0))
    for _ in range(rounds):
        for g, T in zip(groups, tables):
            e = (T * g.delta).sum(axis=1)
            over = np.flatnonzero(e > params.distortion_cap)
            if len(over):
                lam = 1.0 - params.distortion_cap / e[over]
                T[over] *= (1.0 - lam)[:, None]
                T[over, g.sources[over]] += lam
        disc, dist, _ = _violations(tables, groups, params)
        if disc <= 0 and dist <= 1e-12:
            return tables
        (r0, r1), _ = _rates(tables, groups)
        if r0 <= 0:
            _relabel(tables[0], r0, 1e-3)
            continue
        ratio = min(max(r1 / r0, rlo), rhi)
        options = [(r0, ratio * r0), (r1 / ratio, r1)]
        t0, t1 = min(options, key=lambda t: p0 * abs(t[0] - r0) + p1 * abs(t[1] - r1))
        _relabel(tables[0], r0, t0)
        _relabel(tables[1], r1, t1)
    disc, dist, _ = _violations(tables, groups, params)
    return tables if disc <= 0 and dist <= 1e-12 else None


def _solve_pgd(groups, params, C, objective):
    """Augmented-Lagrangian projected gradient over the row simplices.

    The inner loop is monotone projected gradient with Armijo backtracking on
    the augmented Lagrangian, in the metric weighting row ``i`` of group ``s``
    by ``p_s q_i`` (so every source cell moves at a comparable rate). The
    total-variation kink is smoothed with a width that shrinks over the run.
    Every ``inner_steps`` iterations the multipliers are updated and the
    iterate (repaired if needed) competes for best.
    """
    reference = _reference_point(groups, params, C)
    best, best_obj, source = reference, objective(reference), "reference"
    p = np.array([g.p for g in groups])
    eps, cap = params.epsilon, params.distortion_cap
    # Discrimination constraints a @ (r0, r1) <= 0.
    a = np.array([
        [1 - (1 + eps) * p[0], -(1 + eps) * p[1]],
        [-(1 + eps) * p[0], 1 - (1 + eps) * p[1]],
        [(1 - eps) * p[0] - 1, (1 - eps) * p[1]],
        [(1 - eps) * p[0], (1 - eps) * p[1] - 1],
    ])
    label1 = (np.arange(C) % 2 == 1).astype(float)
    metric = [g.p * g.q[:, None] for g in groups]

    def lagrangian(tables, lam_disc, lam_dist, rho, mu, with_grad):
        rs = np.array([g.q @ T[:, 1::2].sum(axis=1) for g, T in zip(groups, tables)])
        m_disc = np.maximum(0.0, lam_disc + rho * (a @ rs))
        value = (m_disc @ m_disc - lam_disc @ lam_disc) / (2 * rho)
        coef = m_disc @ a
        grads = []
        for s, (g, T) in enumerate(zip(groups, tables)):
            diff = g.q @ T - g.Q
            smooth = np.sqrt(diff ** 2 + mu ** 2)
            e = (T * g.delta).sum(axis=1)
            m_dist = np.maximum(0.0, lam_dist[s] + rho * (e - cap))
            value += g.p * 0.5 * (smooth - mu).sum() + params.distortion_weight * g.p * (g.q @ e)
            value += (m_dist @ m_dist - lam_dist[s] @ lam_dist[s]) / (2 * rho)
            if with_grad:
                # Gradient already divided by the metric p_s q_i.
                S = (0.5 * diff / smooth)[None, :] + params.distortion_weight * g.delta
                S = S + (m_dist / (g.p * g.q))[:, None] * g.delta + (coef[s] / g.p) * label1
                grads.append(S)
        return value, grads

    tables = [T.copy() for T in reference]
    lam_disc = np.zeros(4)
    lam_dist = [np.zeros(len(g.sources)) for g in groups]
    rho = params.penalty
    step = params.step_size
    prev_violation = math.inf
    for outer in range(max(1, params.max_iter // params.inner_steps)):
        mu = max(1e-6, 1e-2 / (1.0 + outer))
        value, grads = lagrangian(tables, lam_disc, lam_dist, rho, mu, True)
        for _ in range(params.inner_steps):
            for _ in range(40):
                trial = [project_rows(T - step * S) for T, S in zip(tables, grads)]
                moved = sum(float((w * (U - T) ** 2).sum()) for w, U, T in zip(metric, trial, tables))
                new_value, _ = lagrangian(trial, lam_disc, lam_dist, rho, mu, False)
                if new_value <= value - 1e-4 * moved / step:
                    break
                step *= 0.5
            else:
                break
            tables = trial
            value, grads = lagrangian(tables, lam_disc, lam_dist, rho, mu, True)
            step *= 1.5
            if moved == 0:
                break
        rs = np.array(_rates(tables, groups)[0])
        lam_disc = np.maximum(0.0, lam_disc + rho * (a @ rs))
        for s, g in enumerate(groups):
            e = (tables[s] * g.delta).sum(axis=1)
            lam_dist[s] = np.maximum(0.0, lam_dist[s] + rho * (e - cap))

        disc, dist, _ = _violations(tables, groups, params)
        violation = max(disc, dist, 0.0)
        candidate = [T.copy() for T in tables] if violation == 0 else _repair(tables, groups, params)
        if candidate is not None:
            obj = objective(candidate)
            if obj < best_obj - 1e-12:
                best, best_obj, source = candidate, obj, "projected_gradient"
        if violation > 0.25 * prev_violation:
            rho = min(rho * 2.0, params.max_penalty)
        prev_violation = violation
    return best, source


def _solve_highs(groups, params, C):
    cost, A_ub, b_ub, A_eq, b_eq, t_off = _linear_program(groups, params, C)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise InfeasibleError(f"linear program failed: {res.message}", DISCRIMINATION)
    tables = []
    for g, to in zip(groups, t_off):
        R = len(g.sources)
        T = np.clip(res.x[to:to + R * C].reshape(R, C), 0.0, None)
        T[T < 1e-12] = 0.0
        tables.append(T / T.sum(axis=1, keepdims=True))
    return tables, "linear_program"


def _report(tables, groups, params, source):
    r, overall = _rates(tables, groups)
    disc, dist, simplex = _violations(tables, groups, params)
    return {
        "source": source,
        "total_variation": _tv(tables, groups),
        "expected_distortion": _expected_distortion(tables, groups),
        "positive_rate": {"unprivileged": r[0], "privileged": r[1], "overall": float(overall)},
        "base_rate": {"unprivileged": groups[0].base_rate, "privileged": groups[1].base_rate},
        "discrimination_excess": float(disc),
        "distortion_excess": float(dist),
        "simplex_error": float(simplex),
        "epsilon": params.epsilon,
        "distortion_cap": params.distortion_cap,
    }


# ---------------------------------------------------------------------------
# Fit / transform


def op_fit(train: TabularDataset, params: OPParams | None = None) -> OPModel:
    """Fit the transformation tables on a discretized training set.

    Raises :class:`InfeasibleError` when no table can satisfy the constraints
    and :class:`DomainTooLargeError` when the cell count exceeds
    ``params.max_cells``.
    """
    params = params or OPParams()
    domain = OPDomain.from_dataset(train, params.max_cells)
    groups = _groups(train, domain, params)
    C = domain.n_cells

    identity = [_identity(g, C) for g in groups]
    disc, dist, _ = _violations(identity, groups, params)
    if disc <= 0 and dist <= 0:
        return OPModel(domain, params, tuple(g.sources for g in groups), tuple(identity),
                       _report(identity, groups, params, "identity"))
    check_feasible(groups, params, C)

    if params.solver == "highs":
        tables, source = _solve_highs(groups, params, C)
    else:
        def objective(tables):
            return (_tv(tables, groups)
                    + params.distortion_weight * _expected_distortion(tables, groups))
        tables, source = _solve_pgd(groups, params, C, objective)

    report = _report(tables, groups, params, source)
    if (report["discrimination_excess"] > params.tol or report["distortion_excess"] > params.tol
            or report["simplex_error"] > 1e-6):
        binding = DISCRIMINATION if report["discrimination_excess"] > params.tol else DISTORTION
        raise InfeasibleError(f"solution violates the {binding} constraint beyond tolerance", binding)
    return OPModel(domain, params, tuple(g.sources for g in groups), tuple(tables), report)


def op_transform(model: OPModel, ds: TabularDataset, seed: int = 0) -> TabularDataset:
    """Sample each row's new (features, label) cell from its table row.

    Row ``i`` uses the ``i``-th uniform draw of ``default_rng(seed)``, so the
    result depends only on ``(seed, row index)``. Weights are unchanged.
    """
    cells = model.domain.cells(ds)
    u = np.random.default_rng(seed).random(ds.n)
    new_cells = cells.copy()
    for s in (0, 1):
        rows = np.flatnonzero(ds.s == s)
        if not len(rows):
            continue
        sources, T = model.sources[s], model.tables[s]
        pos = np.searchsorted(sources, cells[rows])
        pos = np.minimum(pos, len(sources) - 1)
        seen = sources[pos] == cells[rows]
        cdf = np.cumsum(T, axis=1)
        cdf[:, -1] = 1.0
        hit = rows[seen]
        picks = (cdf[pos[seen]] < u[hit, None]).sum(axis=1)
        # Skip zero-probability cells a floating-point tie could select.
        rowsT = T[pos[seen]]
        for k in np.flatnonzero(rowsT[np.arange(len(hit)), picks] <= 0):
            nz = np.flatnonzero(rowsT[k] > 0)
            picks[k] = nz[np.searchsorted(nz, picks[k]) % len(nz)]
        new_cells[hit] = picks
    X = np.array(ds.X, copy=True)
    if model.domain.column_index:
        codes = np.stack(np.unravel_index(new_cells // 2, model.domain.radices), axis=1)
        X[:, list(model.domain.column_index)] = codes
    return ds.replace(X=X, y=(new_cells % 2).astype(int))
