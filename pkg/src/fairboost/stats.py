"""Mann-Whitney U comparisons between seed-replicated samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

IMPROVED = "improved"
WORSENED = "worsened"
NONE = "none"

ALL_TIED = "all_values_identical"
EXACT_MAX_N = 8  # exact enumeration below this many values per side


@dataclass(frozen=True)
class SampleSet:
    values: tuple
    metric: str = ""
    condition: str = ""

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("a sample set needs at least one value")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite value in sample set {self.condition!r}/{self.metric!r}")
        object.__setattr__(self, "values", values)

    @property
    def median(self) -> float:
        return float(np.median(self.values))


@dataclass(frozen=True)
class TestResult:
    u_statistic: float
    p_value: float
    significant: bool
    direction: str
    alpha: float = 0.05
    method: str = "exact"
    flags: tuple = ()

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "u_statistic": self.u_statistic,
            "p_value": self.p_value,
            "significant": self.significant,
            "direction": self.direction,
            "alpha": self.alpha,
            "method": self.method,
            "flags": list(self.flags),
        }


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def rank_sum_distribution(ranks: Sequence[float], n_a: int) -> dict[int, int]:
    """Null distribution of twice the rank sum of a size-``n_a`` subset.

    Counts, for every achievable value of ``2 * sum(ranks[subset])``, the number
    of subsets producing it. Midranks are halves, so doubling keeps keys integral.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    # table[j] maps doubled rank sum -> number of size-j subsets.
    table = [dict() for _ in range(n_a + 1)]
    table[0][0] = 1
    for r in doubled:
        for j in range(min(n_a, len(table) - 1), 0, -1):
            prev = table[j - 1]
            if not prev:
                continue
            cur = table[j]
            for total, count in prev.items():
                cur[total + r] = cur.get(total + r, 0) + count
    return table[n_a]


def _exact_p(ranks, n_a, n_b, u_a, alternative):
    dist = rank_sum_distribution(ranks, n_a)
    offset = n_a * (n_a + 1)  # doubled n_a(n_a+1)/2
    mu2 = n_a * n_b  # doubled mean of U
    u2_obs = int(round(2 * u_a))
    total = math.comb(n_a + n_b, n_a)
    hits = 0
    for rsum2, count in dist.items():
        u2 = rsum2 - offset
        if alternative == "two-sided":
            hit = abs(u2 - mu2) >= abs(u2_obs - mu2)
        elif alternative == "greater":  # b stochastically larger -> small U_a
            hit = u2 <= u2_obs
        else:
            hit = u2 >= u2_obs
        if hit:
            hits += count
    return min(1.0, hits / total)


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _normal_p(pooled_ranks, n_a, n_b, u_a, alternative):
    n = n_a + n_b
    _, tie_counts = np.unique(pooled_ranks, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / (n * (n - 1))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    mu = n_a * n_b / 2.0
    sd = math.sqrt(var)
    if alternative == "two-sided":
        z = max(abs(u_a - mu) - 0.5, 0.0) / sd
        return min(1.0, 2.0 * _normal_sf(z))
    if alternative == "greater":
        z = (mu - u_a - 0.5) / sd
    else:
        z = (u_a - mu - 0.5) / sd
    return min(1.0, _normal_sf(z))


def mann_whitney_u(a, b, alpha: float = 0.05, alternative: str = "two-sided",
                   method: str = "auto") -> TestResult:
    """Mann-Whitney U test of sample ``a`` against sample ``b``.

    ``u_statistic`` is U for ``a`` (pairs with a > b, ties counting one half).
    ``method="auto"`` enumerates the permutation distribution exactly when
    either side has fewer than 8 values and otherwise uses the normal
    approximation with tie and continuity corrections. ``alternative="greater"``
    tests whether ``b`` is stochastically larger than ``a``.

    ``direction`` is ``"improved"`` when the result is significant and ``b`` has
    the larger median (mean rank on equal medians), ``"worsened"`` in the
    mirrored case, ``"none"`` otherwise.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    xa, xb = _values(a), _values(b)
    n_a, n_b = len(xa), len(xb)
    if n_a == 0 or n_b == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([xa, xb])
    ranks = rankdata(pooled)
    u_a = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)

    if np.all(pooled == pooled[0]):
        return TestResult(u_a, 1.0, False, NONE, alpha, "degenerate", (ALL_TIED,))

    if method == "auto":
        method = "exact" if min(n_a, n_b) < EXACT_MAX_N else "normal"
    if method == "exact":
        p = _exact_p(ranks, n_a, n_b, u_a, alternative)
    else:
        p = _normal_p(ranks, n_a, n_b, u_a, alternative)

    significant = p < alpha
    direction = NONE
    if significant:
        diff = float(np.median(xb) - np.median(xa))
        if diff == 0.0:
            # U_b - U_a has the sign of b's mean-rank advantage.
            diff = (n_a * n_b - u_a) - u_a
        if diff > 0:
            direction = IMPROVED
        elif diff < 0:
            direction = WORSENED
    return TestResult(u_a, p, significant, direction, alpha, method)


def compare_conditions(baseline: SampleSet, treatment: SampleSet, alpha: float = 0.05,
                       two_sided: bool = True) -> TestResult:
    """Three-way verdict of ``treatment`` against ``baseline`` on one metric.

    With ``two_sided=False`` the one-sided test in the direction of the
    observed difference is used.
    """
    if baseline.metric and treatment.metric and baseline.metric != treatment.metric:
        raise ValueError(
            f"metric mismatch: baseline {baseline.metric!r} vs treatment {treatment.metric!r}")
    if two_sided:
        return mann_whitney_u(baseline, treatment, alpha)
    up = mann_whitney_u(baseline, treatment, alpha, alternative="greater")
    down = mann_whitney_u(baseline, treatment, alpha, alternative="less")
    best = up if up.p_value <= down.p_value else down
    if best.significant:
        direction = IMPROVED if best is up else WORSENED
    else:
        direction = NONE
    return TestResult(best.u_statistic, best.p_value, best.significant, direction, alpha,
                      best.method, best.flags)


def verdict_marker(result: TestResult | None) -> str:
    """Table marker: ``+`` improved (green), ``-`` worsened (red), blank otherwise."""
    if result is None:
        return ""
    return {IMPROVED: "+", WORSENED: "-"}.get(result.direction, "")
