import csv
import io
import json

import numpy as np
import pandas as pd
import pytest

from conftest import DATA, ROOT
from fairboost.errors import ConfigError
from fairboost.experiment import (
    CellResult,
    Pipeline,
    ReportError,
    attach_comparisons,
    config_from_dict,
    emit_report,
    load_config,
    results_to_dict,
    run_cell,
    run_grid,
)
from fairboost.experiment.report import render_markdown
from fairboost.metrics import GroupOutcomeCounts, MetricReport
from fairboost.models import ClassifierSpec

FAST = {"lfr": {"k": 5, "max_iter": 200}, "op": {"max_iter": 300}}


def small_config(**overrides):
    data = {
        "n_seeds": 3,
        "datasets": [{"name": "german", "path": str(DATA / "german.csv"), "max_rows": 300}],
        "models": [{"kind": "logistic"}],
        "singles": ["none", "rw", "op"],
        **FAST,
    }
    data.update(overrides)
    return config_from_dict(data)


def report_of(ndi, f1):
    return MetricReport(ndi, ndi, f1, f1, GroupOutcomeCounts(5, 5, 2, 2, 2, 1, 1, 6))


def test_presets_load_and_validate():
    paper = load_config(ROOT / "configs" / "paper_grid.yaml")
    full = load_config(ROOT / "configs" / "full_grid.yaml")
    assert [d.name for d in paper.datasets] == ["german", "compas", "adult"]
    assert paper.n_seeds == 10 and paper.combiners == ("majority",)
    assert set(full.combiners) == {"majority", "bagging", "stacking"}
    assert len(full.ensemble_members) == 4


@pytest.mark.parametrize("bad", [
    {"datasets": []},
    {"datasets": ["german"], "n_seeds": 0},
    {"datasets": ["mystery"]},
    {"datasets": ["german"], "colour": 1},
    {"datasets": ["german"], "two_sided": "yes"},
    {"datasets": ["german"], "lfr": {"prototypes": 3}},
    {"datasets": ["german"], "singles": ["rw"]},
    {"datasets": ["german"], "ensembles": {"combiners": ["vote"], "members": []}},
    {"datasets": ["german"], "ensembles": {"combiners": ["majority"], "members": [["rw"]]}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.yaml")


def test_overrides_and_dataset_sections():
    cfg = config_from_dict({"datasets": [{"name": "german", "lfr": {"k": 7}}], "lfr": {"A_z": 3.0}})
    assert cfg.datasets[0].lfr.k == 7 and cfg.datasets[0].lfr.A_z == 3.0
    again = cfg.with_overrides(n_seeds=2, master_seed=9)
    assert (again.n_seeds, again.master_seed) == (2, 9)


def test_counting_contract():
    cfg = small_config(n_seeds=10, singles=["none"])
    cells = run_grid(cfg)
    assert len(cells) == 1 and len(cells[0].reports) == 10
    assert all(r is not None for r in cells[0].reports)


def test_run_cell_is_deterministic():
    cfg = small_config()
    pipe = Pipeline(ClassifierSpec("logistic"), ("op",))
    assert run_cell(cfg, "german", pipe, 1) == run_cell(cfg, "german", pipe, 1)


def test_group_independent_data_gives_fair_baseline(tmp_path):
    df = pd.read_csv(DATA / "german.csv", dtype=str)
    rng = np.random.default_rng(0)
    df["sex"] = rng.permutation(df["sex"].to_numpy())
    df["personal_status"] = rng.permutation(df["personal_status"].to_numpy())
    path = tmp_path / "german.csv"
    df.to_csv(path, index=False)
    cfg = config_from_dict({"datasets": [{"name": "german", "path": str(path)}], "n_seeds": 3,
                            "models": ["logistic"], "singles": ["none"]})
    cell = run_grid(cfg)[0]
    # Sampling noise on a 300-row test split keeps this a little below 1.
    assert cell.mean("ndi") > 0.85


def test_lfr_failure_is_recorded_with_cell_identity():
    cfg = small_config(singles=["none", "lfr"], lfr={"k": 1, "max_iter": 20})
    cells = {c.key: c for c in run_grid(cfg)}
    lfr = cells["german/logistic/single:lfr"]
    assert all(r is None for r in lfr.reports)
    assert [f["seed_index"] for f in lfr.failures] == [0, 1, 2]
    assert all(f["error"] == "LFRValidationError" and f["cell"] == lfr.key for f in lfr.failures)
    assert all("skipped" in c for c in lfr.comparisons)
    results = results_to_dict(cfg, list(cells.values()))
    assert results["summary"]["n_failures"] == 3
    assert results["summary"]["n_reports"] == 3


def test_grid_completeness_structure_and_seed_sensitivity():
    cfg = small_config(ensembles={"combiners": ["majority", "bagging"], "members": [["rw", "op"]]})
    a = run_grid(cfg)
    b = run_grid(cfg.with_overrides(master_seed=1))
    assert [c.key for c in a] == [c.key for c in b]
    n_reports = sum(r is not None for c in a for r in c.reports)
    n_failures = sum(len(c.failures) for c in a)
    assert n_reports + n_failures == len(a) * cfg.n_seeds
    assert [c.mean("f1") for c in a] != [c.mean("f1") for c in b]
    ens = {c.key: c for c in a}["german/logistic/bagging:rw+op"]
    against = sorted({c["against"] for c in ens.comparisons})
    assert against == ["german/logistic/single:op", "german/logistic/single:rw"]


def test_parallel_run_matches_serial():
    cfg = small_config(n_seeds=2)
    serial = results_to_dict(cfg, run_grid(cfg, jobs=1))
    parallel = results_to_dict(cfg, run_grid(cfg, jobs=2))
    assert json.dumps(serial, sort_keys=True) == json.dumps(parallel, sort_keys=True)


def test_table2_layout_for_lfr():
    cfg = small_config(
        n_seeds=2, singles=["none", "lfr", "rw", "op"],
        ensembles={"combiners": ["majority"], "members": [["lfr", "op"], ["lfr", "rw"], ["rw", "op"], ["lfr", "rw", "op"]]},
    )
    text = render_markdown(results_to_dict(cfg, run_grid(cfg)))
    section = text.split("### LFR with Logistic Regression")[1]
    assert section.strip().splitlines()[0] == "| Performance | Dataset | LFR | +OP | +RW | All |"
    table1 = text.split("### Logistic Regression")[1].strip().splitlines()[0]
    assert table1 == "| Performance | Dataset | Baseline | LFR | OP | RW |"


def _fake_grid(treatment_reports, two_sided=True):
    model = ClassifierSpec("logistic")
    base = CellResult("german", Pipeline(model, ("none",)), tuple(range(10)),
                      [report_of(0.5 + 0.01 * i, 0.7 + 0.001 * i) for i in range(10)])
    treat = CellResult("german", Pipeline(model, ("rw",)), tuple(range(10)), treatment_reports(base))
    cells = [base, treat]
    attach_comparisons(cells, 0.05, two_sided)
    return cells


def test_identical_treatment_gets_no_markers():
    cfg = small_config(n_seeds=10)
    cells = _fake_grid(lambda base: list(base.reports))
    assert all(c["marker"] == "" for c in cells[1].comparisons)
    text = render_markdown(results_to_dict(cfg, cells))
    rows = [line for line in text.splitlines() if line.startswith("|")]
    assert rows and not any("(+)" in r or "(-)" in r for r in rows)


def test_separated_treatment_gets_markers():
    cfg = small_config(n_seeds=10)
    cells = _fake_grid(lambda base: [report_of(r.ndi + 0.3, r.f1 - 0.2) for r in base.reports])
    markers = {c["metric"]: c["marker"] for c in cells[1].comparisons}
    assert markers == {"ndi": "+", "f1": "-"}
    text = render_markdown(results_to_dict(cfg, cells))
    assert "0.845 (+)" in text and "0.504 (-)" in text


def test_one_sided_flag_reaches_tests_and_legend():
    cfg = small_config(n_seeds=10, two_sided=False)
    assert not cfg.two_sided
    # In the observed direction the one-sided p is the smaller one.
    shift = lambda base: [report_of(r.ndi + 0.03, r.f1) for r in base.reports]
    two = {c["metric"]: c for c in _fake_grid(shift)[1].comparisons}
    one = {c["metric"]: c for c in _fake_grid(shift, two_sided=False)[1].comparisons}
    assert one["ndi"]["p_value"] < two["ndi"]["p_value"]
    text = render_markdown(results_to_dict(cfg, _fake_grid(shift, two_sided=False)))
    assert "one-sided Mann-Whitney U" in text


def test_empty_results_give_valid_files(tmp_path):
    for results in ({}, {"cells": [], "failures": []}):
        for fmt in ("json", "csv", "markdown"):
            for path in emit_report(results, fmt, tmp_path / fmt):
                text = path.read_text()
                if path.suffix == ".json":
                    assert json.loads(text) == results
                elif path.suffix == ".csv":
                    assert len(list(csv.reader(io.StringIO(text)))) == 1
                else:
                    assert "No results." in text


def test_json_reload_round_trip_is_byte_identical(tmp_path):
    cfg = small_config(n_seeds=2, singles=["none", "rw", "lfr"], lfr={"k": 1, "max_iter": 20})
    results = results_to_dict(cfg, run_grid(cfg))
    [path] = emit_report(results, "json", tmp_path / "a")
    reloaded = json.loads(path.read_text())
    for fmt in ("json", "csv", "markdown"):
        first = emit_report(results, fmt, tmp_path / "first")
        second = emit_report(reloaded, fmt, tmp_path / "second")
        for p, q in zip(first, second):
            assert p.read_bytes() == q.read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError):
        emit_report({}, "markdown", blocker / "sub")
    with pytest.raises(ReportError):
        emit_report({}, "xml", tmp_path)


def test_grid_csv_has_one_row_per_cell_and_seed(tmp_path):
    cfg = small_config(n_seeds=2)
    results = results_to_dict(cfg, run_grid(cfg))
    grid, summary = emit_report(results, "csv", tmp_path)
    rows = list(csv.DictReader(grid.open()))
    assert len(rows) == len(results["cells"]) * 2
    assert {r["status"] for r in rows} == {"ok"}
    assert len(list(csv.DictReader(summary.open()))) == len(results["cells"])
