"""Bundled dataset specs for German credit, COMPAS and Adult.

All three use ``sex`` as the protected attribute and a small set of coarse,
discrete features, so the optimized pre-processing domain stays enumerable:

German   credit_history (3 groups), savings (3), employment (3), age (<=25 / >25)
         label credit: 1 (good) -> 1, 2 (bad) -> 0; privileged: male
COMPAS   age_cat (3), c_charge_degree (F/M), priors_count (0 / 1-3 / >3),
         race (Caucasian / other); label two_year_recid: 0 -> 1 (favorable);
         privileged: Female
Adult    age decade (7 bins), education years (9 bins), race (White / other);
         label income: >50K -> 1; privileged: Male

The protected column is also appended to the features.
"""

from __future__ import annotations

from .dataset import BINARY, CATEGORICAL, CONTINUOUS, WILDCARD, ColumnSchema, DatasetSpec

GERMAN = DatasetSpec(
    name="german",
    label_column="credit",
    label_remap={"1": 1, "2": 0},
    favorable_label_raw="1",
    protected_column="sex",
    privileged_value_raw="male",
    columns=(
        ColumnSchema(
            "credit_history", CATEGORICAL, ("none/paid", "delay", "other"),
            value_map={"A30": "none/paid", "A31": "none/paid", "A32": "none/paid",
                       "A33": "delay", "A34": "other"},
        ),
        ColumnSchema(
            "savings", CATEGORICAL, ("<500", "500+", "unknown/none"),
            value_map={"A61": "<500", "A62": "<500", "A63": "500+", "A64": "500+",
                       "A65": "unknown/none"},
        ),
        ColumnSchema(
            "employment", CATEGORICAL, ("unemployed", "1-4 years", "4+ years"),
            value_map={"A71": "unemployed", "A72": "1-4 years", "A73": "1-4 years",
                       "A74": "4+ years", "A75": "4+ years"},
        ),
        ColumnSchema("age", CONTINUOUS, bin_edges=(25,), bin_labels=("<=25", ">25")),
    ),
    notes="UCI Statlog German credit; sex derived from personal_status (A92, A95 female).",
)

COMPAS = DatasetSpec(
    name="compas",
    label_column="two_year_recid",
    label_remap={"0": 1, "1": 0},
    favorable_label_raw="0",
    protected_column="sex",
    privileged_value_raw="Female",
    columns=(
        ColumnSchema("age_cat", CATEGORICAL, ("Less than 25", "25 - 45", "Greater than 45")),
        ColumnSchema("c_charge_degree", CATEGORICAL, ("F", "M")),
        ColumnSchema("priors_count", CONTINUOUS, bin_edges=(0, 3), bin_labels=("0", "1-3", ">3")),
        ColumnSchema("race", CATEGORICAL, ("Caucasian", "other"),
                     value_map={"Caucasian": "Caucasian", WILDCARD: "other"}),
    ),
    notes="ProPublica two-year recidivism after the standard screening filters.",
)

ADULT = DatasetSpec(
    name="adult",
    label_column="income",
    label_remap={">50K": 1, "<=50K": 0},
    favorable_label_raw=">50K",
    protected_column="sex",
    privileged_value_raw="Male",
    columns=(
        ColumnSchema(
            "age", CONTINUOUS, bin_edges=(19, 29, 39, 49, 59, 69),
            bin_labels=("<20", "20s", "30s", "40s", "50s", "60s", ">=70"),
        ),
        ColumnSchema(
            "education_num", CONTINUOUS, bin_edges=(5, 6, 7, 8, 9, 10, 11, 12),
            bin_labels=("<6", "6", "7", "8", "9", "10", "11", "12", ">12"),
        ),
        ColumnSchema("race", CATEGORICAL, ("White", "other"),
                     value_map={"White": "White", WILDCARD: "other"}),
    ),
    notes="UCI Adult train and test files concatenated (48,842 rows).",
)

PRESETS = {spec.name: spec for spec in (GERMAN, COMPAS, ADULT)}
DEFAULT_FILES = {"german": "german.csv", "compas": "compas.csv", "adult": "adult.csv"}


def get_preset(name: str) -> DatasetSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown dataset preset {name!r}; known: {sorted(PRESETS)}") from None


__all__ = ["GERMAN", "COMPAS", "ADULT", "PRESETS", "DEFAULT_FILES", "get_preset", "BINARY"]
