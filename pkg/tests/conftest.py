from pathlib import Path

import numpy as np
import pytest

from fairboost.dataset import BINARY, CATEGORICAL, ColumnSchema, TabularDataset

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

# Acceptance outcomes, filled by tests/test_acceptance.py: {number: (passed, detail)}.
CRITERIA = {}


def record(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def make_discrete(n=200, d=3, radix=3, seed=0, bias=0.3, with_protected=True) -> TabularDataset:
    """Random categorical dataset whose label depends on the features and on s."""
    rng = np.random.default_rng(seed)
    X = rng.integers(0, radix, size=(n, d)).astype(float)
    s = rng.integers(0, 2, size=n)
    logit = (X - (radix - 1) / 2).sum(axis=1) * 0.6 + bias * 4 * (s - 0.5)
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    schema = [ColumnSchema(f"f{j}", CATEGORICAL, tuple(f"c{k}" for k in range(radix))) for j in range(d)]
    if with_protected:
        X = np.column_stack([X, s])
        schema.append(ColumnSchema("sex", BINARY, protected=True))
    return TabularDataset(X, y, s, None, tuple(schema), "synthetic")


@pytest.fixture
def discrete():
    return make_discrete()
