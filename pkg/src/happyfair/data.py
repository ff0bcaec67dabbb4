"""Synthetic loan data, CSV ingestion, and the loan/working-hours happiness functions."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PROB_TOL, Dataset, HappinessSpec, LabelSpace, eval_happiness, happiness_from_exprs

# Category lists follow the public Adult schema.
EDUCATION = (
    "Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
    "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
    "Doctorate", "5th-6th", "Preschool",
)
WORKCLASS = (
    "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
    "State-gov", "Without-pay", "Never-worked",
)
RACE = ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black")
SEX = ("Male", "Female")  # index doubles as the group bit
AGE_RANGE = (17, 90)
HOURS_RANGE = (1, 99)

SYNTHETIC_SCHEMA = {
    "age": None,
    "hours_per_week": None,
    "education": EDUCATION,
    "workclass": WORKCLASS,
    "race": RACE,
    "sex": SEX,
    "yearly_salary": None,
    "loan_requested": None,
}
SYNTHETIC_COLUMNS = tuple(SYNTHETIC_SCHEMA) + ("y", "z")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticConfig:
    count: int = 48842
    seed: int = 0
    income_mean: float = 50_000.0
    income_sd: float = 1_000.0
    base_loan_mean: float = 500_000.0
    base_loan_sd: float = 10_000.0
    group1_surcharge: float = 50_000.0
    group0_fraction: float = 2 / 3

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if min(self.income_mean, self.income_sd, self.base_loan_mean, self.base_loan_sd) <= 0:
            raise ValueError("monetary scales must be positive")
        if not 0 < self.group0_fraction < 1:
            raise ValueError("group0_fraction must lie in (0, 1)")


def _normal(rng, n):
    # Box-Muller on the generator's uniforms; u1 in (0, 1] keeps log finite
    u1 = 1.0 - rng.random(n)
    u2 = rng.random(n)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _uniform_int(rng, n, lo, hi):
    return lo + np.floor(rng.random(n) * (hi - lo + 1)).astype(np.int64)


def _uniform_choice(rng, n, options):
    idx = np.floor(rng.random(n) * len(options)).astype(np.int64)
    return np.array(options, dtype=object)[idx]


def generate_synthetic(cfg: SyntheticConfig = SyntheticConfig()) -> Dataset:
    """Loan applicants whose approval ignores the group but whose request does not.

    Approval is ``10 * salary >= base loan``; group 1 asks for the base loan
    plus ``cfg.group1_surcharge``. The base loan is kept in ``meta``.
    Uniforms come from numpy's counter-based Philox generator, so output is
    identical across platforms for a given seed.
    """
    n = cfg.count
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    z = (rng.random(n) >= cfg.group0_fraction).astype(np.int64)
    age = _uniform_int(rng, n, *AGE_RANGE)
    hours = _uniform_int(rng, n, *HOURS_RANGE)
    education = _uniform_choice(rng, n, EDUCATION)
    workclass = _uniform_choice(rng, n, WORKCLASS)
    race = _uniform_choice(rng, n, RACE)
    salary = np.round(cfg.income_mean + cfg.income_sd * _normal(rng, n), 2)
    base_loan = np.round(cfg.base_loan_mean + cfg.base_loan_sd * _normal(rng, n), 2)
    y = (10.0 * salary >= base_loan).astype(np.int64)
    loan = base_loan + cfg.group1_surcharge * z
    features = {
        "age": age.astype(float),
        "hours_per_week": hours.astype(float),
        "education": education,
        "workclass": workclass,
        "race": race,
        "sex": np.array(SEX, dtype=object)[z],
        "yearly_salary": salary,
        "loan_requested": loan,
    }
    return Dataset(LabelSpace.binary(), SYNTHETIC_SCHEMA, features, y, z,
                   meta={"base_loan": base_loan})


# -- CSV ---------------------------------------------------------------------

_P_COL = re.compile(r"^p_(\d+)$")


def format_number(x) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_csv(dataset: Dataset, path, predictions: bool = True) -> None:
    """Write features, ``y``, ``z`` and (optionally) ``p_0..p_{K-1}`` with a header row."""
    names = list(dataset.schema)
    header = names + ["y", "z"]
    k = len(dataset.label_space)
    with_p = predictions and dataset.p_hat is not None
    if with_p:
        header += [f"p_{j}" for j in range(k)]
    labels = dataset.label_space.labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(dataset)):
            row = []
            for name in names:
                v = dataset.features[name][i]
                row.append(v if dataset.schema[name] is not None else format_number(v))
            row += [labels[dataset.y[i]], int(dataset.z[i])]
            if with_p:
                row += [repr(float(p)) for p in dataset.p_hat[i]]
            writer.writerow(row)


def write_predictions(p_hat, path) -> None:
    p_hat = np.asarray(p_hat, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"p_{j}" for j in range(p_hat.shape[1])])
        for row in p_hat:
            writer.writerow([repr(float(p)) for p in row])


def read_predictions(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or not all(_P_COL.match(h) for h in header):
            raise DataError(f"{path}: expected only p_0..p_K columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}: unparseable probability on line {lineno}") from None
    p = np.array(rows, dtype=float)
    bad = np.flatnonzero(np.abs(p.sum(axis=1) - 1) > 1e-6)
    if bad.size:
        raise DataError(f"{path}: probabilities on line {bad[0] + 2} do not sum to 1")
    return _renormalize(p)


def _renormalize(p):
    # rows already exact to rounding are kept bit-for-bit
    off = np.abs(p.sum(axis=1) - 1) > PROB_TOL
    p[off] /= p[off].sum(axis=1, keepdims=True)
    return p


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, header has {len(header)}")
    return header, rows


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def infer_schema(path) -> dict:
    """Numeric columns are those whose every cell parses as a float."""
    header, rows = _read_rows(path)
    schema = {}
    for j, name in enumerate(header):
        if name in ("y", "z") or _P_COL.match(name):
            continue
        cells = [r[j] for r in rows]
        if all(_is_number(c) for c in cells):
            schema[name] = None
        else:
            schema[name] = tuple(sorted(set(cells)))
    return schema


def load_csv(path, schema=None, label_space: LabelSpace | None = None) -> Dataset:
    """Typed CSV parse into a :class:`Dataset`.

    Required columns are the schema's features plus ``y`` and ``z``;
    ``p_0..p_{K-1}`` are read as soft predictions when present. When
    ``schema`` is omitted it is inferred from the file.
    """
    path = Path(path)
    if schema is None:
        schema = infer_schema(path)
    header, rows = _read_rows(path)
    col = {name: j for j, name in enumerate(header)}
    for name in list(schema) + ["y", "z"]:
        if name not in col:
            raise DataError(f"{path}: missing column {name!r}")
    p_cols = sorted(
        ((int(_P_COL.match(h).group(1)), j) for h, j in col.items() if _P_COL.match(h))
    )
    if p_cols and [i for i, _ in p_cols] != list(range(len(p_cols))):
        raise DataError(f"{path}: prediction columns must be p_0..p_K without gaps")

    if label_space is None:
        raw = {r[col["y"]] for r in rows}
        if p_cols:
            label_space = LabelSpace.of_size(max(len(p_cols), 2))
        elif all(_is_number(v) and float(v).is_integer() for v in raw):
            top = max(int(float(v)) for v in raw) if raw else 1
            label_space = LabelSpace.of_size(max(top + 1, 2))
        else:
            label_space = LabelSpace(tuple(sorted(raw)))
    lookup = {str(label): i for i, label in enumerate(label_space.labels)}

    features = {}
    for name, categories in schema.items():
        j = col[name]
        if categories is None:
            values = []
            for i, r in enumerate(rows, start=1):
                try:
                    values.append(float(r[j]))
                except ValueError:
                    raise DataError(f"{path}: row {i}, column {name!r}: cannot parse {r[j]!r}") from None
            features[name] = np.array(values, dtype=float)
        else:
            values = [r[j] for r in rows]
            for i, v in enumerate(values, start=1):
                if v not in categories:
                    raise DataError(f"{path}: row {i}, column {name!r}: unknown category {v!r}")
            features[name] = np.array(values, dtype=object)

    y, z = [], []
    for i, r in enumerate(rows, start=1):
        label = r[col["y"]]
        if label not in lookup and _is_number(label) and float(label).is_integer():
            label = str(int(float(label)))
        if label not in lookup:
            raise DataError(f"{path}: row {i}: label {r[col['y']]!r} not in {label_space.labels}")
        y.append(lookup[label])
        if r[col["z"]] not in ("0", "1"):
            raise DataError(f"{path}: row {i}: group z must be 0 or 1, got {r[col['z']]!r}")
        z.append(int(r[col["z"]]))

    p_hat = None
    if p_cols:
        if len(p_cols) != len(label_space):
            raise DataError(f"{path}: {len(p_cols)} prediction columns for {len(label_space)} labels")
        p_hat = np.zeros((len(rows), len(p_cols)))
        for i, r in enumerate(rows, start=1):
            try:
                p_hat[i - 1] = [float(r[j]) for _, j in p_cols]
            except ValueError:
                raise DataError(f"{path}: row {i}: unparseable prediction") from None
            if np.any(p_hat[i - 1] < 0) or abs(p_hat[i - 1].sum() - 1) > 1e-6:
                raise DataError(f"{path}: row {i}: predictions do not sum to 1")
        p_hat = _renormalize(p_hat)
    return Dataset(label_space, schema, features, np.array(y, dtype=np.int64),
                   np.array(z, dtype=np.int64), p_hat)


# -- application happiness functions -------------------------------------------

EQUAL_FUNDING_EXPR = "yhat * loan_requested"


def equal_funding_happiness() -> HappinessSpec:
    """Approved applicants are as happy as the amount they borrow."""
    return happiness_from_exprs(EQUAL_FUNDING_EXPR, kind="equal-funding")


def _adult_component(yhat, x, y, z):
    hours = np.asarray(x["hours_per_week"], dtype=float)
    if np.any((hours < HOURS_RANGE[0]) | (hours > HOURS_RANGE[1]) | (hours != np.round(hours))):
        raise DataError("hours_per_week must be an integer in [1, 99]")
    return 100.0 * np.asarray(yhat, dtype=float) - hours


def adult_spec() -> HappinessSpec:
    """High income for few working hours: ``100 * yhat - hours_per_week``."""
    return HappinessSpec((_adult_component,), ("hours_utility",), "adult")


def adult_happiness(yhat, x, y, z) -> np.ndarray:
    return eval_happiness(adult_spec(), yhat, x, y, z)


# Financial risk utility

RATE_BANDS = ((750, 0.04), (700, 0.06), (650, 0.08), (600, 0.12))
RATE_FLOOR = 0.18
PURPOSE_BONUS = {
    "Home": 0.08,
    "Auto": 0.02,
    "Education": 0.12,
    "Debt Consolidation": 0.04,
    "Other": 0.05,
}
EDUCATION_BONUS = {"Master": 0.01, "Doctorate": 0.02}
EMPLOYMENT_BONUS = {"Employed": 0.01, "Self-Employed": 0.01}
TENURE_BONUS = 0.01
TENURE_YEARS = 5
FINANCIAL_FEATURES = (
    "loan_requested", "credit_score", "duration",
    "loan_purpose", "education_level", "employment_status", "tenure",
)


def rho(credit_score):
    """Interest rate for a credit score; each band includes its lower edge."""
    score = np.asarray(credit_score, dtype=float)
    conditions = [score >= lo for lo, _ in RATE_BANDS]
    rates = [rate for _, rate in RATE_BANDS]
    out = np.select(conditions, rates, default=RATE_FLOOR)
    return float(out) if out.ndim == 0 else out


def _lookup(table, values, strict_name=None):
    values = np.asarray(values, dtype=object)
    flat = values.reshape(-1)
    out = np.empty(flat.shape, dtype=float)
    for i, v in enumerate(flat):
        if strict_name and v not in table:
            raise DataError(f"unknown {strict_name} {v!r}; expected one of {sorted(table)}")
        out[i] = table.get(v, 0.0)
    return out.reshape(values.shape)


def roi_bonus(x):
    """Estimated return on investment: sum of purpose, education, employment and tenure bonuses."""
    tenure = np.asarray(x["tenure"], dtype=float)
    total = (
        _lookup(PURPOSE_BONUS, x["loan_purpose"], "loan purpose")
        + _lookup(EDUCATION_BONUS, x["education_level"])
        + _lookup(EMPLOYMENT_BONUS, x["employment_status"])
        + TENURE_BONUS * (tenure > TENURE_YEARS)
    )
    return float(total) if total.ndim == 0 else total


def _financial_component(yhat, x, y, z):
    missing = [f for f in FINANCIAL_FEATURES if f not in x]
    if missing:
        raise DataError(f"missing feature(s) {missing}")
    loan = np.asarray(x["loan_requested"], dtype=float)
    cost = loan * rho(x["credit_score"]) * np.asarray(x["duration"], dtype=float)
    return np.asarray(yhat, dtype=float) * (loan * roi_bonus(x) - cost)


def financial_spec() -> HappinessSpec:
    """Approved borrowers gain the loan's return and pay its total interest."""
    return HappinessSpec((_financial_component,), ("net_return",), "financial")


def financial_happiness(yhat, x, y, z) -> np.ndarray:
    return eval_happiness(financial_spec(), yhat, x, y, z)


def money(x) -> str:
    return f"${x:,.0f}" if math.isfinite(x) else "n/a"
