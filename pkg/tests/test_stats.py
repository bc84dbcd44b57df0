import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import rankdata

from fairboost.stats import (
    ALL_TIED,
    IMPROVED,
    NONE,
    WORSENED,
    SampleSet,
    compare_conditions,
    mann_whitney_u,
    verdict_marker,
)


def enumerated_p(a, b):
    """Two-sided exact p by listing every assignment of the pooled ranks."""
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n_a = len(a)
    mean_u = Fraction(n_a * len(b), 2)

    def u_of(idx):
        return Fraction(sum(Fraction(ranks[i]) for i in idx)) - Fraction(n_a * (n_a + 1), 2)

    observed = abs(u_of(range(n_a)) - mean_u)
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n_a):
        total += 1
        if abs(u_of(idx) - mean_u) >= observed:
            hits += 1
    return hits / total


def test_identical_samples():
    res = mann_whitney_u([1, 2, 3, 4], [1, 2, 3, 4])
    assert res.p_value == 1.0 and res.direction == NONE


def test_separated_three_by_three():
    res = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert res.u_statistic == 0.0
    assert res.p_value == pytest.approx(0.1, abs=1e-12)


def test_separated_ten_by_ten_significant():
    res = mann_whitney_u(np.arange(10), np.arange(10) + 10)
    assert res.significant and res.p_value < 0.05 and res.direction == IMPROVED


def test_exact_matches_enumeration_up_to_seven():
    rng = np.random.default_rng(0)
    for n_a in range(1, 8):
        for n_b in range(1, 8):
            for _ in range(3):
                # Coarse values force ties on many draws.
                a = rng.integers(0, 5, n_a).astype(float)
                b = rng.integers(0, 5, n_b).astype(float)
                if np.all(np.concatenate([a, b]) == a[0]):
                    continue
                res = mann_whitney_u(a, b, method="exact")
                assert res.p_value == pytest.approx(enumerated_p(a, b), abs=1e-12), (a, b)


def test_normal_approximation_close_to_exact():
    rng = np.random.default_rng(1)
    for _ in range(30):
        a = rng.normal(size=10)
        b = rng.normal(loc=rng.uniform(0, 1.5), size=10)
        exact = mann_whitney_u(a, b, method="exact").p_value
        approx = mann_whitney_u(a, b, method="normal").p_value
        assert abs(exact - approx) <= 0.02


def test_all_tied_flag():
    res = mann_whitney_u([0.5] * 5, [0.5] * 5)
    assert res.flags == (ALL_TIED,) and not res.significant


def test_verdicts_and_markers():
    base = SampleSet(tuple(np.linspace(0.1, 0.2, 10)), "ndi", "base")
    up = SampleSet(tuple(np.linspace(0.5, 0.6, 10)), "ndi", "up")
    down = SampleSet(tuple(np.linspace(0.0, 0.05, 10)), "ndi", "down")
    assert compare_conditions(base, base).direction == NONE
    assert verdict_marker(compare_conditions(base, up)) == "+"
    assert compare_conditions(base, down).direction == WORSENED
    assert verdict_marker(compare_conditions(base, down)) == "-"
    assert verdict_marker(compare_conditions(base, base)) == ""
    assert compare_conditions(base, up, two_sided=False).direction == IMPROVED


def test_metric_mismatch_rejected():
    with pytest.raises(ValueError):
        compare_conditions(SampleSet((1.0,), "ndi"), SampleSet((2.0,), "f1"))


def test_sample_set_rejects_nonfinite():
    with pytest.raises(ValueError):
        SampleSet((1.0, float("nan")))
