"""Build the bundled header CSVs under data/ from the raw public datasets.

The raw files (UCI German credit, UCI Adult train+test, ProPublica COMPAS
two-year scores) are shipped inside the ``responsibly`` wheel on PyPI, so the
script can run without direct access to the UCI or ProPublica hosts::

    python scripts/prepare_data.py                 # pip-downloads the wheel
    python scripts/prepare_data.py --wheel path/to/responsibly-*.whl
    python scripts/prepare_data.py --raw-dir dir/  # german.data, adult.data, ...

Output columns keep the raw values; feature selection and grouping happen in
the dataset presets, not here.
"""

from __future__ import annotations

import argparse
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import pandas as pd

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "personal_status",
    "other_debtors", "residence_since", "property", "age",
    "other_installment_plans", "housing", "existing_credits", "job",
    "num_dependents", "telephone", "foreign_worker", "credit",
]
ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country", "income",
]
COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid",
]
RAW_MEMBERS = {
    "german.data": "responsibly/dataset/german/german.data",
    "adult.data": "responsibly/dataset/adult/adult.data",
    "adult.test": "responsibly/dataset/adult/adult.test",
    "compas-scores-two-years.csv": "responsibly/dataset/compas/compas-scores-two-years.csv",
}


def _read_raw(args) -> dict[str, bytes]:
    if args.raw_dir:
        return {name: (Path(args.raw_dir) / name).read_bytes() for name in RAW_MEMBERS}
    wheel = args.wheel
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-d", tmp,
             "responsibly==0.1.2"],
            check=True,
        )
        wheel = next(Path(tmp).glob("responsibly-*.whl"))
    with zipfile.ZipFile(wheel) as zf:
        return {name: zf.read(member) for name, member in RAW_MEMBERS.items()}


def german(raw: bytes) -> pd.DataFrame:
    df = pd.read_csv(io.BytesIO(raw), sep=" ", header=None, names=GERMAN_COLUMNS)
    # A92 (female div/sep/married) and A95 (female single) are the female codes.
    df["sex"] = df["personal_status"].map(lambda v: "female" if v in ("A92", "A95") else "male")
    return df


def adult(train: bytes, test: bytes) -> pd.DataFrame:
    frames = []
    for raw, skip in ((train, 0), (test, 1)):
        df = pd.read_csv(
            io.BytesIO(raw), header=None, names=ADULT_COLUMNS, skiprows=skip,
            skipinitialspace=True, dtype=str, keep_default_na=False,
        )
        frames.append(df)
    df = pd.concat(frames, ignore_index=True)
    df = df[df["age"].str.len() > 0]
    df["income"] = df["income"].str.rstrip(".")
    return df


def compas(raw: bytes) -> pd.DataFrame:
    df = pd.read_csv(io.BytesIO(raw))
    # Standard ProPublica screening filters.
    keep = (
        (df["days_b_screening_arrest"] <= 30)
        & (df["days_b_screening_arrest"] >= -30)
        & (df["is_recid"] != -1)
        & (df["c_charge_degree"] != "O")
        & (df["score_text"] != "N/A")
    )
    return df.loc[keep, COMPAS_COLUMNS].reset_index(drop=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wheel", type=Path)
    parser.add_argument("--raw-dir", type=Path)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    args = parser.parse_args(argv)

    raw = _read_raw(args)
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = {
        "german.csv": german(raw["german.data"]),
        "adult.csv": adult(raw["adult.data"], raw["adult.test"]),
        "compas.csv": compas(raw["compas-scores-two-years.csv"]),
    }
    for name, df in outputs.items():
        df.to_csv(args.out / name, index=False)
        print(f"{name}: {len(df)} rows, {df.shape[1]} columns")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
