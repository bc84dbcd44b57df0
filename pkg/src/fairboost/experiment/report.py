"""Report emission from a results dictionary (as produced by ``results_to_dict``).

Formats:

* ``json`` writes ``results.json``: the results dictionary itself, canonically
  serialized (sorted keys, two-space indent), so reload and re-emit is
  byte-identical.
* ``csv`` writes ``grid.csv`` (one row per cell and seed) and ``summary.csv``
  (one row per cell with means and significance markers).
* ``markdown`` writes ``report.md`` with one pre-processor table per model
  (baseline and each single pre-processor, fairness and accuracy rows per
  dataset) and one ensemble table per combiner, model and single
  pre-processor (that pre-processor alone, then each ensemble containing it).

Markers: ``+`` significant improvement, ``-`` significant worsening, nothing
otherwise; pre-processor tables compare against the baseline, ensemble tables
against the single pre-processor heading the table.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..errors import FairboostError

FORMATS = ("json", "csv", "markdown")

PRE_LABELS = {"none": "Baseline", "rw": "RW", "lfr": "LFR", "op": "OP"}
MODEL_LABELS = {"logistic": "Logistic Regression", "forest": "Random Forest"}
DATASET_LABELS = {"german": "German", "compas": "COMPAS", "adult": "Adult"}
METRIC_ROWS = (("ndi", "Fairness"), ("f1", "Accuracy"))

GRID_COLUMNS = ("cell", "dataset", "model", "combiner", "pipeline", "seed_index", "status",
                "di", "ndi", "f1", "accuracy", "edge_flags", "error", "message")
SUMMARY_COLUMNS = ("cell", "dataset", "model", "combiner", "pipeline", "n_ok",
                   "mean_ndi", "mean_f1", "markers")


class ReportError(FairboostError):
    """The report could not be written."""


def _label(table, key):
    return table.get(key, key)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def _marker(cell: dict, against: str, metric: str) -> str:
    for c in cell.get("comparisons", ()):
        if c.get("against") == against and c.get("metric") == metric:
            return c.get("marker", "")
    return ""


def _value(cell: dict | None, metric: str, against: str | None) -> str:
    if cell is None:
        return ""
    text = _fmt(cell.get(f"mean_{metric}"))
    marker = _marker(cell, against, metric) if against else ""
    return f"{text} ({marker})" if marker else text


def _ordered(values, order):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    rank = {k: i for i, k in enumerate(order)}
    return sorted(seen, key=lambda v: (rank.get(v, len(rank)), v))


def _index(results: dict):
    cells = results.get("cells") or []
    by_key = {(c["dataset"], c["model"], c["combiner"], tuple(c["pipeline"])): c for c in cells}
    datasets = _ordered([c["dataset"] for c in cells], list(DATASET_LABELS))
    models = _ordered([c["model"] for c in cells], ["forest", "logistic"])
    return cells, by_key, datasets, models


def _table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines


def _body_rows(datasets, columns, metric_value):
    rows = []
    for metric, name in METRIC_ROWS:
        for i, d in enumerate(datasets):
            rows.append([name if i == 0 else "", _label(DATASET_LABELS, d)]
                        + [metric_value(d, col, metric) for col in columns])
    return rows


def _singles_tables(cells, by_key, datasets, models) -> list[str]:
    out = []
    singles = _ordered([c["pipeline"][0] for c in cells if c["combiner"] == "single"],
                       ["none", "lfr", "op", "rw"])
    if not singles:
        return out
    for model in models:
        def value(d, pre, metric, model=model):
            cell = by_key.get((d, model, "single", (pre,)))
            against = None if pre == "none" else f"{d}/{model}/single:none"
            return _value(cell, metric, against)

        out += ["", f"### {_label(MODEL_LABELS, model)}", ""]
        out += _table(["Performance", "Dataset"] + [_label(PRE_LABELS, p) for p in singles],
                      _body_rows(datasets, singles, value))
    return out


def _ensemble_column(others: tuple, universe: set) -> str:
    if len(others) > 1 and len(others) + 1 == len(universe):
        return "All"
    return "".join(f"+{_label(PRE_LABELS, p)}" for p in others)


def _ensemble_tables(cells, by_key, datasets, models) -> list[str]:
    out = []
    ensembles = [c for c in cells if c["combiner"] != "single"]
    combiners = _ordered([c["combiner"] for c in ensembles], ["majority", "bagging", "stacking"])
    for combiner in combiners:
        members = _ordered([tuple(c["pipeline"]) for c in ensembles if c["combiner"] == combiner], [])
        universe = {p for m in members for p in m}
        heads = _ordered(list(universe), ["lfr", "rw", "op"])
        out += ["", f"## Ensembles ({combiner})"]
        for head in heads:
            combos = [m for m in members if head in m]
            combos.sort(key=lambda m: (len(m), sorted(_label(PRE_LABELS, p) for p in m if p != head)))
            for model in models:
                def value(d, col, metric, model=model, head=head):
                    if col is None:
                        return _value(by_key.get((d, model, "single", (head,))), metric, None)
                    return _value(by_key.get((d, model, combiner, col)), metric,
                                  f"{d}/{model}/single:{head}")

                header = [_label(PRE_LABELS, head)]
                header += [_ensemble_column(tuple(p for p in m if p != head), universe) for m in combos]
                out += ["", f"### {_label(PRE_LABELS, head)} with {_label(MODEL_LABELS, model)}", ""]
                out += _table(["Performance", "Dataset"] + header,
                              _body_rows(datasets, [None] + combos, value))
    return out


def render_markdown(results: dict) -> str:
    cells, by_key, datasets, models = _index(results)
    lines = ["# Experiment report", ""]
    if not cells:
        lines.append("No results.")
        return "\n".join(lines) + "\n"
    n_seeds = len(results.get("seeds") or [])
    config = results.get("config") or {}
    alpha = config.get("alpha")
    sided = "two-sided" if config.get("two_sided", True) else "one-sided"
    lines.append(f"Means over {n_seeds} seeds. Fairness is NDI, accuracy is F1. "
                 f"`(+)` / `(-)`: significant improvement / worsening "
                 f"({sided} Mann-Whitney U, alpha = {alpha}).")
    lines += ["", "## Pre-processors against the baseline"]
    lines += _singles_tables(cells, by_key, datasets, models)
    lines += _ensemble_tables(cells, by_key, datasets, models)
    failures = results.get("failures") or []
    lines += ["", "## Failures", ""]
    if failures:
        lines += _table(["Cell", "Seed", "Member", "Error"],
                        [[f["cell"], str(f["seed_index"]), str(f.get("member") or ""), f["error"]]
                         for f in failures])
    else:
        lines.append("None.")
    return "\n".join(lines) + "\n"


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _csv_value(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render_grid_csv(results: dict) -> str:
    rows = []
    for cell in results.get("cells") or []:
        errors = {f["seed_index"]: f for f in cell.get("failures", ())}
        ident = [cell["cell"], cell["dataset"], cell["model"], cell["combiner"], "+".join(cell["pipeline"])]
        for seed in cell.get("seeds", ()):
            rep = seed.get("report")
            fail = errors.get(seed["seed_index"], {})
            if rep is None:
                vals = ["failed", "", "", "", "", "", fail.get("error", ""), fail.get("message", "")]
            else:
                vals = ["ok", rep["di"], rep["ndi"], rep["f1"], rep["accuracy"],
                        ";".join(rep.get("edge_flags", ())), "", ""]
            rows.append([_csv_value(v) for v in ident + [seed["seed_index"]] + vals])
    return _csv_text(GRID_COLUMNS, rows)


def render_summary_csv(results: dict) -> str:
    rows = []
    for cell in results.get("cells") or []:
        markers = ";".join(f"{c['metric']}{c.get('marker', '') or '='}@{c['against']}"
                           for c in cell.get("comparisons", ()))
        rows.append([_csv_value(v) for v in (
            cell["cell"], cell["dataset"], cell["model"], cell["combiner"], "+".join(cell["pipeline"]),
            cell["n_ok"], cell["mean_ndi"], cell["mean_f1"], markers)])
    return _csv_text(SUMMARY_COLUMNS, rows)


def render_json(results: dict) -> str:
    return json.dumps(results, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(results: dict, fmt: str, out_dir) -> list[Path]:
    """Write the report files for ``fmt`` into ``out_dir``; returns their paths."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown report format {fmt!r}; known: {list(FORMATS)}")
    if fmt == "json":
        files = {"results.json": render_json(results)}
    elif fmt == "csv":
        files = {"grid.csv": render_grid_csv(results), "summary.csv": render_summary_csv(results)}
    else:
        files = {"report.md": render_markdown(results)}
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            paths.append(path)
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return paths
