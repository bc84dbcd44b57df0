import json

import numpy as np
import pytest

from conftest import DATA
from fairboost.dataset import CONTINUOUS, ColumnSchema, TabularDataset, discretize, encode_onehot, load_csv, split
from fairboost.errors import LFRValidationError
from fairboost.preprocess import LFRModel, LFRParams, lfr_fit, lfr_objective, lfr_transform
from fairboost.presets import GERMAN


def _instance(rng, n=12, d=3, k=4):
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n).astype(float)
    s = rng.integers(0, 2, n)
    s[:2] = [0, 1]
    counts = rng.integers(1, 4, n).astype(float)
    V = rng.normal(size=(k, d))
    u = rng.uniform(0.1, 0.9, k)
    return V, u, X, y, s, counts


def _fd_gradient(V, u, X, y, s, counts, params, h=1e-6):
    theta = np.concatenate([V.ravel(), u])
    k, d = V.shape
    out = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        lp = lfr_objective((theta + e)[:k * d].reshape(k, d), (theta + e)[k * d:], X, y, s, counts,
                           params, with_grad=False)[0]
        lm = lfr_objective((theta - e)[:k * d].reshape(k, d), (theta - e)[k * d:], X, y, s, counts,
                           params, with_grad=False)[0]
        out[i] = (lp - lm) / (2 * h)
    return out


@pytest.mark.parametrize("params", [
    LFRParams(k=4),
    LFRParams(k=4, smoothing=0.0),
    LFRParams(k=4, reduction="mean", A_x=0.5),
])
def test_gradient_matches_finite_differences(params):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        V, u, X, y, s, counts = _instance(rng)
        _, _, gV, gu = lfr_objective(V, u, X, y, s, counts, params)
        g = np.concatenate([gV.ravel(), gu])
        fd = _fd_gradient(V, u, X, y, s, counts, params)
        worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
    assert worst <= 1e-4


def test_single_prototype_has_no_parity_gap():
    rng = np.random.default_rng(1)
    V, u, X, y, s, counts = _instance(rng, k=1)
    _, (L_z, _, _), _, _ = lfr_objective(V, u, X, y, s, counts, LFRParams(k=1))
    assert L_z == 0.0


def _german_train():
    ds = encode_onehot(discretize(load_csv(DATA / "german.csv", GERMAN)))
    return split(ds, 0.7, 0).train


def test_german_defaults_give_both_labels_and_monotone_trace():
    train = _german_train()
    model = lfr_fit(train, LFRParams(), seed=0)
    labels = lfr_transform(model, train).y
    assert 0 < labels.mean() < 1
    assert all(b <= a for a, b in zip(model.loss_trace, model.loss_trace[1:]))


def test_loss_trace_non_increasing_on_random_fits():
    rng = np.random.default_rng(2)
    for seed in range(5):
        n = 80
        X = rng.normal(size=(n, 4))
        s = rng.integers(0, 2, n)
        y = (X[:, 0] + s + 0.3 * rng.normal(size=n) > 0.5).astype(int)
        schema = tuple(ColumnSchema(f"x{j}", CONTINUOUS) for j in range(4))
        model = lfr_fit(TabularDataset(X, y, s, None, schema), LFRParams(k=5, max_iter=300),
                        seed=seed, validate=False)
        trace = np.array(model.loss_trace)
        assert np.all(np.diff(trace) <= 0)


def _model(V, u, d):
    return LFRModel(np.asarray(V, float), np.asarray(u, float), LFRParams(k=len(u)),
                    np.zeros(d), np.ones(d), (0.0,), {})


def test_saturated_scores_label_everything_one():
    model = _model([[0.0, 0.0], [5.0, 5.0]], [1.0, 1.0], 2)
    ds = TabularDataset(np.random.default_rng(0).normal(size=(6, 2)), np.zeros(6), np.zeros(6))
    assert lfr_transform(model, ds).y.tolist() == [1] * 6


def test_row_at_prototype_reconstructs_it():
    V = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]
    model = _model(V, [0.2, 0.5, 0.8], 2)
    ds = TabularDataset(np.array(V), np.zeros(3), np.zeros(3))
    assert np.allclose(lfr_transform(model, ds).X, V, atol=1e-3)


def test_empty_dataset_passes_through():
    model = _model([[0.0, 0.0], [1.0, 1.0]], [0.3, 0.7], 2)
    ds = TabularDataset(np.zeros((0, 2)), [], [])
    assert lfr_transform(model, ds).n == 0


def test_degenerate_labels_raise_validation_error():
    n = 40
    X = np.random.default_rng(3).normal(size=(n, 2))
    y = np.ones(n, dtype=int)
    y[0] = 0
    s = np.arange(n) % 2
    with pytest.raises(LFRValidationError):
        lfr_fit(TabularDataset(X, y, s), LFRParams(k=2, max_iter=200), seed=0)


def test_json_round_trip_preserves_transform():
    train = _german_train()
    model = lfr_fit(train, LFRParams(max_iter=200), seed=1, validate=False)
    again = LFRModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert lfr_transform(again, train).same_content(lfr_transform(model, train))


def test_invalid_params():
    with pytest.raises(ValueError):
        LFRParams(k=0)
    with pytest.raises(ValueError):
        LFRParams(reduction="median")
