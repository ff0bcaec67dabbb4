import numpy as np
import pytest
from hypothesis import given, strategies as st

from happyfair.core import (
    Dataset,
    HappinessSpec,
    LabelSpace,
    Sample,
    check_distribution,
    eval_happiness,
    happiness_from_exprs,
)
from happyfair.data import EQUAL_FUNDING_EXPR, adult_spec, equal_funding_happiness
from happyfair.expr import ExprEvalError, MissingFeatureError


def small_dataset(p_hat=None):
    return Dataset(
        LabelSpace.binary(),
        {"income": None, "color": ("red", "blue")},
        {"income": [1.0, 2.0, 3.0], "color": ["red", "blue", "red"]},
        y=[0, 1, 1],
        z=[0, 1, 0],
        p_hat=p_hat,
    )


def test_label_space():
    ls = LabelSpace(("no", "yes", "maybe"))
    assert len(ls) == 3 and ls.index("maybe") == 2
    with pytest.raises(ValueError):
        LabelSpace(("a", "a"))
    with pytest.raises(ValueError):
        LabelSpace(("a",))


def test_dataset_rows_and_groups():
    d = small_dataset(np.array([[0.5, 0.5], [0.1, 0.9], [1.0, 0.0]]))
    assert len(d) == 3
    s = d[1]
    assert isinstance(s, Sample)
    assert (s.y, s.z, s.features["color"]) == (1, 1, "blue")
    assert tuple(d.group_counts()) == (2, 1)
    sub = d.take([2, 0])
    assert list(sub.features["income"]) == [3.0, 1.0]


def test_dataset_is_read_only():
    d = small_dataset()
    with pytest.raises(ValueError):
        d.y[0] = 1


@pytest.mark.parametrize("kwargs", [
    {"z": [0, 2, 0]},
    {"y": [0, 1, 2]},
    {"p_hat": np.array([[0.5, 0.6], [0.5, 0.5], [1.0, 0.0]])},
    {"p_hat": np.array([[1.5, -0.5], [0.5, 0.5], [1.0, 0.0]])},
])
def test_dataset_validation(kwargs):
    base = dict(label_space=LabelSpace.binary(), schema={"income": None},
                features={"income": [1.0, 2.0, 3.0]}, y=[0, 1, 1], z=[0, 1, 0])
    base.update(kwargs)
    with pytest.raises(ValueError):
        Dataset(**base)


def test_unknown_category_rejected():
    with pytest.raises(ValueError):
        Dataset(LabelSpace.binary(), {"c": ("a",)}, {"c": ["b"]}, [0], [0])


def test_check_distribution():
    check_distribution([0.25, 0.75])
    with pytest.raises(ValueError):
        check_distribution([0.2, 0.7])


def test_equal_funding_examples():
    spec = equal_funding_happiness()
    assert spec.render() == [EQUAL_FUNDING_EXPR]
    assert eval_happiness(spec, 1, {"loan_requested": 550000.0}, 1, 1).tolist() == [550000.0]
    assert eval_happiness(spec, 0, {"loan_requested": 550000.0}, 1, 1).tolist() == [0.0]


def test_adult_example():
    assert eval_happiness(adult_spec(), 1, {"hours_per_week": 40}, 0, 0).tolist() == [60.0]


def test_vector_spec_and_features_used():
    spec = happiness_from_exprs(["yhat", "income * ind(y == yhat)", "z"], {"income": None})
    assert spec.dim == 3 and spec.features_used() == {"income"}
    out = spec.evaluate(np.array([1, 0]), {"income": np.array([5.0, 7.0])}, np.array([1, 1]), np.array([0, 1]))
    assert out.tolist() == [[1.0, 5.0, 0.0], [0.0, 0.0, 1.0]]


def test_missing_feature_raises():
    with pytest.raises(MissingFeatureError):
        eval_happiness(equal_funding_happiness(), 1, {}, 0, 0)


def test_non_finite_happiness_raises():
    spec = HappinessSpec((lambda yhat, x, y, z: np.inf * yhat,))
    with pytest.raises(ExprEvalError):
        spec.evaluate(1, {}, 0, 0)


@given(st.integers(0, 1), st.floats(-1e9, 1e9), st.integers(0, 1), st.integers(0, 1))
def test_happiness_is_finite_for_every_label(yhat, loan, y, z):
    out = eval_happiness(equal_funding_happiness(), yhat, {"loan_requested": loan}, y, z)
    assert out.shape == (1,) and np.isfinite(out).all()
