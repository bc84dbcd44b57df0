import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairboost.dataset import TabularDataset
from fairboost.errors import UnfittableError
from fairboost.preprocess import ReweighingModel, reweigh_apply, reweigh_fit


def hand_example() -> TabularDataset:
    # (s, y) counts: (1,1)=4, (1,0)=2, (0,1)=1, (0,0)=3
    s = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0]
    y = [1, 1, 1, 1, 0, 0, 1, 0, 0, 0]
    return TabularDataset(np.zeros((10, 1)), y, s)


def weighted_rate(ds, group):
    m = ds.s == group
    return ds.w[m & (ds.y == 1)].sum() / ds.w[m].sum()


def test_hand_oracle_weights():
    model = reweigh_fit(hand_example())
    assert model.weight(1, 1) == 0.75
    assert model.weight(1, 0) == 1.5
    assert model.weight(0, 1) == 2.0
    assert model.weight(0, 0) == 2 / 3


def test_hand_example_equalizes_rates():
    ds = hand_example()
    out = reweigh_apply(reweigh_fit(ds), ds)
    assert weighted_rate(out, 1) == pytest.approx(0.5, abs=1e-12)
    assert weighted_rate(out, 0) == pytest.approx(0.5, abs=1e-12)


def test_single_row_lookup():
    model = reweigh_fit(hand_example())
    row = TabularDataset(np.zeros((1, 1)), [1], [1])
    assert reweigh_apply(model, row).w.tolist() == [0.75]


def test_independent_data_gives_unit_weights():
    s = [1] * 4 + [0] * 4
    y = [1, 1, 0, 0] * 2
    model = reweigh_fit(TabularDataset(np.zeros((8, 1)), y, s))
    assert all(v == 1.0 for v in model.weight_table.values())


def test_unit_table_is_identity():
    ds = hand_example()
    model = ReweighingModel({(s, y): 1.0 for s in (0, 1) for y in (0, 1)})
    assert reweigh_apply(model, ds).same_content(ds)


def test_empty_cell_unfittable():
    ds = TabularDataset(np.zeros((4, 1)), [0, 0, 1, 0], [0, 0, 1, 1])
    with pytest.raises(UnfittableError):
        reweigh_fit(ds)


def test_serialization_round_trip():
    model = reweigh_fit(hand_example())
    again = ReweighingModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert again.weight_table == model.weight_table


@settings(max_examples=50, deadline=None)
@given(n=st.integers(20, 500), seed=st.integers(0, 2**32 - 1))
def test_weighted_rates_equal(n, seed):
    rng = np.random.default_rng(seed)
    s, y = rng.integers(0, 2, n), rng.integers(0, 2, n)
    s[:4], y[:4] = [0, 0, 1, 1], [0, 1, 0, 1]
    ds = TabularDataset(np.zeros((n, 1)), y, s)
    out = reweigh_apply(reweigh_fit(ds), ds)
    assert weighted_rate(out, 0) == pytest.approx(weighted_rate(out, 1), abs=1e-9)
    assert out.w.sum() == pytest.approx(n, rel=1e-12)
