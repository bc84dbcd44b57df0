import itertools
import json

import numpy as np
import pytest

from conftest import DATA, make_discrete
from fairboost.dataset import BINARY, CONTINUOUS, ColumnSchema, TabularDataset, discretize, load_csv, split
from fairboost.errors import DatasetError, DomainTooLargeError, InfeasibleError
from fairboost.preprocess import OPDomain, OPModel, OPParams, op_fit, op_transform
from fairboost.presets import COMPAS, GERMAN


def two_cell(n0=400, pos0=200, n1=600, pos1=450) -> TabularDataset:
    """Only the protected column as feature, so the cell is the label alone."""
    s = np.r_[np.zeros(n0), np.ones(n1)].astype(int)
    y = np.r_[np.arange(n0) < pos0, np.arange(n1) < pos1].astype(int)
    return TabularDataset(s[:, None].astype(float), y, s, None,
                          (ColumnSchema("sex", BINARY, protected=True),))


def brute_force_two_cell(ds, step=0.05):
    """Grid over both groups' 2x2 row-stochastic tables with equal output rates."""
    p = [np.mean(ds.s == g) for g in (0, 1)]
    b = [ds.y[ds.s == g].mean() for g in (0, 1)]
    grid = np.round(np.arange(0, 1 + step / 2, step), 10)
    best = np.inf
    for a0, c0, a1, c1 in itertools.product(grid, repeat=4):
        r0 = (1 - b[0]) * a0 + b[0] * (1 - c0)
        r1 = (1 - b[1]) * a1 + b[1] * (1 - c1)
        if abs(r0 - r1) <= 1e-9:
            best = min(best, p[0] * abs(r0 - b[0]) + p[1] * abs(r1 - b[1]))
    return best


def certify(model: OPModel, train: TabularDataset, default_distortion=True):
    """Recompute every constraint from the tables and the training data."""
    cells = model.domain.cells(train)
    C = model.domain.n_cells
    digits = model.domain.digits()
    rates, shares = [], []
    for s in (0, 1):
        T, src = model.tables[s], model.sources[s]
        assert np.all(T >= -1e-12) and np.allclose(T.sum(axis=1), 1.0, atol=1e-6)
        mask = train.s == s
        q = np.array([train.w[mask & (cells == c)].sum() for c in src]) / train.w[mask].sum()
        rates.append(sum(q[i] * T[i, 1::2].sum() for i in range(len(src))))
        shares.append(train.w[mask].sum() / train.w.sum())
        if default_distortion:
            for i, c in enumerate(src):
                dist = 0.0
                for j in range(C):
                    flip = float((c % 2) != (j % 2))
                    ham = np.mean(digits[c // 2] != digits[j // 2]) if digits.shape[1] else 0.0
                    dist += T[i, j] * (model.params.label_cost * flip + model.params.feature_cost * ham)
                assert dist <= model.params.distortion_cap + 1e-4
    overall = shares[0] * rates[0] + shares[1] * rates[1]
    for r in rates:
        assert abs(r / overall - 1) <= model.params.epsilon + 1e-4
    return rates


def test_two_cell_matches_brute_force_grid():
    ds = two_cell()
    zero = np.zeros((2, 2))
    model = op_fit(ds, OPParams(epsilon=0.0, distortion_table=zero))
    rates = certify(model, ds, default_distortion=False)
    assert abs(rates[0] - rates[1]) <= 1e-4
    grid = brute_force_two_cell(ds)
    assert grid == pytest.approx(0.1, abs=1e-12)
    assert abs(model.report["total_variation"] - grid) <= 1e-3


def test_two_cell_highs_matches_brute_force_grid():
    ds = two_cell()
    model = op_fit(ds, OPParams(epsilon=0.0, distortion_table=np.zeros((2, 2)), solver="highs"))
    assert abs(model.report["total_variation"] - brute_force_two_cell(ds)) <= 1e-6


def test_feasible_data_gives_identity():
    ds = two_cell(400, 300, 600, 450)
    model = op_fit(ds, OPParams())
    assert model.report["source"] == "identity" and model.report["total_variation"] == 0.0
    assert op_transform(model, ds, seed=3).same_content(ds)


def test_zero_cap_zero_epsilon_is_infeasible():
    with pytest.raises(InfeasibleError) as info:
        op_fit(two_cell(), OPParams(epsilon=0.0, distortion_cap=0.0))
    assert info.value.constraint == "discrimination"


@pytest.mark.parametrize("seed", range(4))
def test_random_fits_are_certified_and_near_lp_optimum(seed):
    ds = make_discrete(n=300, d=3, radix=3, seed=seed, bias=0.6)
    params = OPParams(epsilon=0.05, distortion_cap=0.5)
    pgd = op_fit(ds, params)
    lp = op_fit(ds, OPParams(epsilon=0.05, distortion_cap=0.5, solver="highs"))
    certify(pgd, ds)
    certify(lp, ds)
    objective = lambda m: m.report["total_variation"] + params.distortion_weight * m.report["expected_distortion"]
    # The LP optimum bounds the iterative solver from below.
    assert objective(lp) <= objective(pgd) + 1e-6
    assert objective(pgd) <= objective(lp) + 0.02


@pytest.mark.parametrize("spec,name", [(GERMAN, "german.csv"), (COMPAS, "compas.csv")])
def test_real_training_splits_certified(spec, name):
    ds = discretize(load_csv(DATA / name, spec))
    train = split(ds, 0.7, 0).train
    model = op_fit(train, OPParams())
    certify(model, train)
    r = model.report
    assert r["simplex_error"] <= 1e-6
    assert r["discrimination_excess"] <= 1e-4 and r["distortion_excess"] <= 1e-4


def test_transform_determinism_and_point_mass():
    ds = make_discrete(n=200, seed=5, bias=0.6)
    model = op_fit(ds, OPParams())
    a, b = op_transform(model, ds, 11), op_transform(model, ds, 11)
    assert a.same_content(b)
    # Replace every table row by a point mass on cell 1: every row maps there.
    tables = tuple(np.eye(model.domain.n_cells)[np.full(len(src), 1)] for src in model.sources)
    point = OPModel(model.domain, model.params, model.sources, tables, model.report)
    for seed in (0, 1, 2):
        out = op_transform(point, ds, seed)
        assert np.all(out.y == 1) and np.all(out.X[:, :3] == 0)
        assert np.array_equal(out.X[:, 3], ds.X[:, 3])


def test_transform_keeps_weights_and_protected():
    ds = make_discrete(n=150, seed=6, bias=0.6).replace(w=np.linspace(0.5, 2, 150))
    model = op_fit(ds, OPParams())
    out = op_transform(model, ds, 0)
    assert np.array_equal(out.w, ds.w) and np.array_equal(out.s, ds.s)


def test_continuous_columns_rejected():
    ds = TabularDataset(np.zeros((4, 1)), [0, 1, 0, 1], [0, 0, 1, 1], None, (ColumnSchema("x", CONTINUOUS),))
    with pytest.raises(DatasetError):
        op_fit(ds)


def test_domain_too_large():
    ds = make_discrete(n=50, d=8, radix=4)
    with pytest.raises(DomainTooLargeError):
        OPDomain.from_dataset(ds, max_cells=10_000)


def test_json_round_trip():
    ds = make_discrete(n=200, seed=7, bias=0.6)
    model = op_fit(ds, OPParams(max_iter=500))
    again = OPModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert again.params == model.params
    assert op_transform(again, ds, 4).same_content(op_transform(model, ds, 4))
