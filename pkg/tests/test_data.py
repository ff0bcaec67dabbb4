from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from happyfair.core import LabelSpace
from happyfair.data import (
    EDUCATION,
    SYNTHETIC_COLUMNS,
    SYNTHETIC_SCHEMA,
    DataError,
    SyntheticConfig,
    adult_happiness,
    financial_happiness,
    generate_synthetic,
    infer_schema,
    load_csv,
    read_predictions,
    rho,
    roi_bonus,
    write_csv,
    write_predictions,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def synthetic():
    return generate_synthetic(SyntheticConfig(seed=11))


def test_synthetic_size_and_balance(synthetic):
    assert len(synthetic) == 48842
    assert 0.49 <= synthetic.y.mean() <= 0.51
    assert 0.32 <= synthetic.z.mean() <= 0.35


def test_surcharge_is_exact(synthetic):
    g1 = synthetic.z == 1
    diff = synthetic.features["loan_requested"][g1] - synthetic.meta["base_loan"][g1]
    assert np.allclose(diff, 50000, rtol=0, atol=1e-6)
    assert diff.mean() == pytest.approx(50000, abs=1e-6)
    g0 = ~g1
    assert np.array_equal(synthetic.features["loan_requested"][g0], synthetic.meta["base_loan"][g0])


def test_approval_ignores_group(synthetic):
    rates = [synthetic.y[synthetic.z == g].mean() for g in (0, 1)]
    assert abs(rates[0] - rates[1]) < 0.02
    salary = synthetic.features["yearly_salary"]
    assert np.array_equal(synthetic.y, (10 * salary >= synthetic.meta["base_loan"]).astype(int))


def test_group_is_sex_and_nuisance_supports(synthetic):
    assert np.array_equal(synthetic.features["sex"] == "Female", synthetic.z == 1)
    age = synthetic.features["age"]
    assert age.min() == 17 and age.max() == 90
    assert set(synthetic.features["education"]) == set(EDUCATION)


def test_generation_is_reproducible():
    a = generate_synthetic(SyntheticConfig(count=500, seed=3))
    b = generate_synthetic(SyntheticConfig(count=500, seed=3))
    c = generate_synthetic(SyntheticConfig(count=500, seed=4))
    assert np.array_equal(a.features["yearly_salary"], b.features["yearly_salary"])
    assert not np.array_equal(a.features["yearly_salary"], c.features["yearly_salary"])


@pytest.mark.parametrize("kwargs", [{"count": 0}, {"income_sd": 0}, {"group0_fraction": 1.0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticConfig(**kwargs)


def test_csv_round_trip(tmp_path):
    d = generate_synthetic(SyntheticConfig(count=50, seed=1))
    d = d.with_predictions(np.random.default_rng(0).dirichlet([1, 1], size=50))
    path = tmp_path / "d.csv"
    write_csv(d, path)
    header = path.read_text().splitlines()[0].split(",")
    assert tuple(header) == SYNTHETIC_COLUMNS + ("p_0", "p_1")
    back = load_csv(path, SYNTHETIC_SCHEMA, LabelSpace.binary())
    for name in SYNTHETIC_SCHEMA:
        assert np.array_equal(back.features[name], d.features[name])
    assert np.array_equal(back.y, d.y) and np.array_equal(back.z, d.z)
    np.testing.assert_allclose(back.p_hat, d.p_hat, rtol=0, atol=1e-15)


def test_three_row_fixture():
    d = load_csv(FIXTURES / "three_rows.csv")
    assert len(d) == 3
    assert d.schema == {"income": None, "color": ("blue", "red")}
    assert d.features["income"].tolist() == [1.5, 2.0, 300.0]
    assert d.p_hat[1].tolist() == [0.25, 0.75]


def test_schema_inference():
    assert infer_schema(FIXTURES / "three_rows.csv") == {"income": None, "color": ("blue", "red")}


def test_bad_group_names_the_row():
    with pytest.raises(DataError, match="row 2"):
        load_csv(FIXTURES / "bad_group.csv", {"income": None, "color": ("red", "blue")})


def test_bad_probabilities():
    with pytest.raises(DataError, match="sum to 1"):
        load_csv(FIXTURES / "bad_probs.csv", {"income": None, "color": ("red", "blue")})


def test_unparseable_cell_names_row_and_column():
    with pytest.raises(DataError, match="row 2, column 'income'"):
        load_csv(FIXTURES / "bad_cell.csv", {"income": None, "color": ("red", "blue")})


def test_missing_column():
    with pytest.raises(DataError, match="missing column 'age'"):
        load_csv(FIXTURES / "three_rows.csv", {"age": None})


def test_prediction_files(tmp_path):
    p = np.array([[0.1, 0.9], [1.0, 0.0]])
    write_predictions(p, tmp_path / "p.csv")
    assert np.array_equal(read_predictions(tmp_path / "p.csv"), p)
    (tmp_path / "q.csv").write_text("p_0,p_1\n0.6,0.5\n")
    with pytest.raises(DataError):
        read_predictions(tmp_path / "q.csv")


# -- happiness functions ----------------------------------------------------------


@pytest.mark.parametrize("score, rate", [(760, 0.04), (750, 0.04), (749.9, 0.06), (700, 0.06),
                                         (650, 0.08), (600, 0.12), (599, 0.18), (580, 0.18)])
def test_rate_bands(score, rate):
    assert rho(score) == rate


@given(st.floats(0, 900), st.floats(0, 900))
def test_rate_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    assert rho(hi) <= rho(lo)


def applicant(**kw):
    x = {"loan_purpose": "Education", "education_level": "Doctorate", "employment_status": "Employed",
         "tenure": 6, "loan_requested": 100000.0, "credit_score": 760, "duration": 10}
    x.update(kw)
    return x


def test_roi_examples():
    assert roi_bonus(applicant()) == pytest.approx(0.16)
    assert roi_bonus(applicant(loan_purpose="Auto", education_level="Bachelor",
                               employment_status="Unemployed", tenure=2)) == pytest.approx(0.02)
    assert roi_bonus(applicant(tenure=5)) == pytest.approx(0.15)
    with pytest.raises(DataError):
        roi_bonus(applicant(loan_purpose="Yacht"))


def test_roi_is_additive():
    x = applicant()
    parts = [roi_bonus(applicant(loan_purpose=p, education_level="None", employment_status="None", tenure=0))
             for p in ("Education",)]
    assert roi_bonus(x) == pytest.approx(parts[0] + 0.02 + 0.01 + 0.01)


def test_financial_examples():
    assert financial_happiness(0, applicant(), 0, 0).tolist() == [0.0]
    assert financial_happiness(1, applicant(), 0, 0)[0] == pytest.approx(-24000)
    assert financial_happiness(1, applicant(duration=0), 0, 0)[0] == pytest.approx(16000)
    with pytest.raises(DataError):
        financial_happiness(1, {"loan_requested": 1.0}, 0, 0)


def test_adult_examples():
    assert adult_happiness(1, {"hours_per_week": 40}, 0, 0).tolist() == [60.0]
    assert adult_happiness(0, {"hours_per_week": 99}, 0, 0).tolist() == [-99.0]
    for bad in (0, 100, 40.5):
        with pytest.raises(DataError):
            adult_happiness(1, {"hours_per_week": bad}, 0, 0)
