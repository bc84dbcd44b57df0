import json

import numpy as np
import pytest

from fairboost.dataset import CONTINUOUS, ColumnSchema, TabularDataset
from fairboost.errors import DimensionMismatchError, SingleClassError
from fairboost.models import (
    ClassifierSpec,
    ForestConfig,
    ForestModel,
    LogisticModel,
    fit_classifier,
    forest_fit,
    logreg_fit,
    model_from_dict,
    predict,
    weighted_loss,
)


def _toy(n=300, d=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X @ rng.normal(size=d) + 0.3 * rng.normal(size=n) > 0).astype(int)
    return X, y


def test_logistic_separable_pair():
    m = logreg_fit(np.array([[-1.0], [1.0]]), np.array([0, 1]), l2_lambda=0.1)
    assert m.coefficients[0] > 0
    assert predict(m, np.array([[-1.0], [1.0]])).labels.tolist() == [0, 1]


def test_logistic_weight_scaling_with_lambda():
    X, y = _toy()
    w = np.random.default_rng(1).uniform(0.5, 2, len(y))
    a = logreg_fit(X, y, w, l2_lambda=1.0)
    b = logreg_fit(X, y, 2 * w, l2_lambda=2.0)
    assert np.allclose(a.coefficients, b.coefficients, atol=1e-8) and abs(a.intercept - b.intercept) < 1e-8


def test_logistic_gradient_finite_differences():
    X, y = _toy(50, 3)
    Z = np.hstack([X, np.ones((50, 1))])
    w = np.random.default_rng(2).uniform(0.5, 2, 50)
    theta = np.random.default_rng(3).normal(size=4)
    _, grad = weighted_loss(theta, Z, y, w, 0.7)
    h = 1e-6
    fd = np.array([(weighted_loss(theta + h * e, Z, y, w, 0.7)[0]
                    - weighted_loss(theta - h * e, Z, y, w, 0.7)[0]) / (2 * h) for e in np.eye(4)])
    assert np.abs(fd - grad).max() / np.abs(grad).max() <= 1e-5


def test_logistic_matches_sklearn():
    from sklearn.linear_model import LogisticRegression

    X, y = _toy()
    w = np.random.default_rng(4).uniform(0.5, 2, len(y))
    ours = logreg_fit(X, y, w, l2_lambda=1.0)
    ref = LogisticRegression(C=1.0, tol=1e-12, max_iter=10_000).fit(X, y, sample_weight=w)
    assert np.allclose(ours.coefficients, ref.coef_[0], atol=1e-5)
    assert ours.intercept == pytest.approx(ref.intercept_[0], abs=1e-5)


def test_logistic_zero_model_threshold():
    m = LogisticModel(np.zeros(2), 0.0, 1.0, True, 0)
    pred = predict(m, np.random.default_rng(0).normal(size=(5, 2)))
    assert np.all(pred.proba == 0.5) and np.all(pred.labels == 1)
    assert np.all(predict(m, np.zeros((3, 2)), threshold=1.1).labels == 0)


def test_single_class_rejected():
    X = np.zeros((4, 1))
    with pytest.raises(SingleClassError):
        logreg_fit(X, np.ones(4))
    with pytest.raises(SingleClassError):
        forest_fit(X, np.zeros(4))


def test_forest_single_split_perfect():
    x = np.linspace(-1, 1, 100)[:, None]
    y = (x[:, 0] > 0).astype(int)
    m = forest_fit(x, y, config=ForestConfig(n_trees=5, max_depth=1), seed=0)
    assert (predict(m, x).labels == y).mean() == 1.0


def test_forest_deterministic_and_weight_scale_invariant():
    X, y = _toy(200, 3)
    a = forest_fit(X, y, None, ForestConfig(n_trees=10), seed=7)
    b = forest_fit(X, y, None, ForestConfig(n_trees=10), seed=7)
    c = forest_fit(X, y, np.full(len(y), 2.0), ForestConfig(n_trees=10), seed=7)
    probe = np.random.default_rng(0).normal(size=(50, 3))
    assert np.array_equal(a.predict_proba(probe), b.predict_proba(probe))
    for ta, tc in zip(a.trees, c.trees):
        assert np.array_equal(ta.feature, tc.feature) and np.array_equal(ta.threshold, tc.threshold)


def test_forest_single_stump_proba():
    x = np.linspace(-1, 1, 40)[:, None]
    y = (x[:, 0] > 0.5).astype(int)
    m = forest_fit(x, y, config=ForestConfig(n_trees=1, max_depth=1, bootstrap=False))
    tree = m.trees[0]
    leaves = tree.apply(x)
    assert np.allclose(m.predict_proba(x), tree.value[leaves])


def test_forest_accuracy_close_to_sklearn():
    from sklearn.ensemble import RandomForestClassifier

    X, y = _toy(600, 5, seed=5)
    ours = (predict(forest_fit(X[:300], y[:300], seed=0), X[300:]).labels == y[300:]).mean()
    ref = RandomForestClassifier(random_state=0).fit(X[:300], y[:300]).score(X[300:], y[300:])
    assert abs(ours - ref) < 0.06


def test_forest_dimension_check():
    X, y = _toy(50, 3)
    with pytest.raises(DimensionMismatchError):
        forest_fit(X, y, config=ForestConfig(n_trees=2)).predict_proba(np.zeros((2, 4)))


def test_model_json_round_trip():
    X, y = _toy(100, 3)
    ds = TabularDataset(X, y, np.zeros(100), None, tuple(ColumnSchema(f"x{j}", CONTINUOUS) for j in range(3)))
    for spec in (ClassifierSpec("logistic"), ClassifierSpec("forest", forest=ForestConfig(n_trees=3))):
        m = fit_classifier(spec, ds, seed=1)
        again = model_from_dict(json.loads(json.dumps(m.to_dict())))
        assert np.array_equal(again.predict_proba(X), m.predict_proba(X))
        assert isinstance(again, (LogisticModel, ForestModel))
