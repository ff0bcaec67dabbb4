import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from happyfair.core import Dataset, LabelSpace, happiness_from_exprs
from happyfair.estimators import EmpiricalMoments, estimate_moments
from happyfair.lp import PostProcessor
from happyfair.postprocess import (
    ALPHA_SWEEP,
    EPS_SWEEP,
    accuracy,
    apply,
    chance_accuracy,
    default_alpha_grid,
    default_eps_grid,
    expected_loss,
    fit_postprocessor,
    happiness_gap,
    max_accuracy,
    sample_label,
    sweep,
)

from oracles import random_moments

SWAP = PostProcessor.from_maps((1, 0), (1, 0), 2)


def two_sample_moments():
    d = Dataset(LabelSpace.binary(), {}, {}, y=[1, 0], z=[0, 1], p_hat=np.array([[0.2, 0.8], [0.6, 0.4]]))
    return estimate_moments(d, happiness_from_exprs("yhat"))


def perfect_moments():
    p = np.zeros((2, 2, 2))
    p[0, 0] = [0.2, 0.1]
    p[1, 1] = [0.4, 0.3]
    return EmpiricalMoments(p, np.zeros((2, 2, 2, 1)), p.sum(axis=(0, 1)), p.sum(axis=0) / p.sum(axis=(0, 1)))


def test_apply():
    p = np.array([0.2, 0.8])
    assert apply(PostProcessor.identity(2), p, 0).tolist() == [0.2, 0.8]
    assert apply(PostProcessor.uniform(2), p, 1).tolist() == [0.5, 0.5]
    assert apply(SWAP, p, 0).tolist() == [0.8, 0.2]


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(0, 1))
def test_apply_returns_a_distribution(seed, k, z):
    rng = np.random.default_rng(seed)
    pp = PostProcessor(rng.dirichlet(np.ones(k), size=(k, 2)))
    out = apply(pp, rng.dirichlet(np.ones(k)), z)
    assert out.min() >= 0 and out.sum() == pytest.approx(1.0)


def test_loss_on_two_sample_fixture():
    # 0.4 from sample 1 (z=0, y=1) plus 0.6 / 2 from sample 2 (z=1, y=0)
    m = two_sample_moments()
    assert expected_loss(PostProcessor.identity(2), m) == pytest.approx(1 - (0.4 + 0.3), abs=1e-15)


def test_loss_on_perfect_moments():
    m = perfect_moments()
    assert expected_loss(PostProcessor.identity(2), m) == pytest.approx(0.0, abs=1e-15)
    assert expected_loss(SWAP, m) == pytest.approx(1.0, abs=1e-15)
    assert accuracy(SWAP, m) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gap_symmetries(seed):
    rng = np.random.default_rng(seed)
    m = random_moments(rng, 3, 2)
    pp = PostProcessor(rng.dirichlet(np.ones(3), size=(3, 2)))
    flipped = PostProcessor(pp.table[:, ::-1])
    np.testing.assert_allclose(happiness_gap(flipped, m.swap_groups()), -happiness_gap(pp, m), atol=1e-15)
    zero = EmpiricalMoments(m.p_yyz, np.zeros_like(m.xi), m.p_z, m.p_y_given_z)
    assert not happiness_gap(pp, zero).any()
    same = EmpiricalMoments(m.p_yyz, np.repeat(m.xi[:, :, :1], 2, axis=2), m.p_z, m.p_y_given_z)
    symmetric_pp = PostProcessor(np.repeat(pp.table[:, :1], 2, axis=1))
    assert not happiness_gap(symmetric_pp, same).any()


def test_sample_label_degenerate_and_seeded():
    pp = PostProcessor.from_maps((1, 0), (0, 0), 2)
    assert sample_label(pp, [1.0, 0.0], 0, 3) == 1
    assert sample_label(pp, [0.0, 1.0], 1, 3) == 0
    rng = np.random.default_rng(0)
    pp = PostProcessor(rng.dirichlet(np.ones(3), size=(3, 2)))
    draws = [sample_label(pp, [0.2, 0.3, 0.5], 1, s) for s in range(50)]
    assert draws == [sample_label(pp, [0.2, 0.3, 0.5], 1, s) for s in range(50)]


def test_sample_label_matches_closed_form():
    rng = np.random.default_rng(1)
    pp = PostProcessor(rng.dirichlet(np.ones(3), size=(3, 2)))
    p_hat = np.array([0.5, 0.2, 0.3])
    counts = np.bincount([sample_label(pp, p_hat, 0, s) for s in range(100_000)], minlength=3)
    tv = 0.5 * np.abs(counts / counts.sum() - apply(pp, p_hat, 0)).sum()
    assert tv <= 0.01


# -- sweeps ---------------------------------------------------------------------


def test_vacuous_epsilon_reaches_maximum_accuracy():
    m = random_moments(np.random.default_rng(3))
    val, test = sweep(m, m, m, [0.0, 0.1, 1e9], EPS_SWEEP)
    assert val.points[-1].accuracy == pytest.approx(max_accuracy(m), abs=1e-12)
    assert [p.constraint_value for p in test.points] == [0.0, 0.1, 1e9]
    assert (val.dataset_tag, test.dataset_tag) == ("validation", "test")


def test_zero_epsilon_on_symmetric_groups():
    m = random_moments(np.random.default_rng(4))
    half = m.p_yyz[:, :, :1] / (2 * m.p_yyz[:, :, 0].sum())
    sym = EmpiricalMoments(np.repeat(half, 2, axis=2), np.repeat(m.xi[:, :, :1], 2, axis=2),
                           [0.5, 0.5], m.p_y_given_z)
    val, _ = sweep(sym, sym, sym, [0.0], EPS_SWEEP)
    assert val.points[0].gap_inf_norm <= 1e-12
    assert val.points[0].accuracy == pytest.approx(max_accuracy(sym), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_curves_are_monotone_and_certified(seed, n):
    m = random_moments(np.random.default_rng(seed), 2, n)
    val, _ = sweep(m, m, m, default_eps_grid(m, 12), EPS_SWEEP)
    feasible = val.feasible()
    acc = [p.accuracy for p in feasible]
    assert all(b >= a - 1e-9 for a, b in zip(acc, acc[1:]))
    for p in feasible:
        assert p.gap_inf_norm <= p.constraint_value + 1e-7
        assert p.gap_inf_norm == max(abs(g) for g in p.gap)
    val, _ = sweep(m, m, m, default_alpha_grid(m, 12), ALPHA_SWEEP)
    gaps = [p.objective for p in val.points]
    assert all(b >= a - 1e-9 for a, b in zip(gaps, gaps[1:]))
    assert all(p.status == "optimal" for p in val.points)


def test_infeasible_points_are_flagged():
    m = random_moments(np.random.default_rng(2))
    val, test = sweep(m, m, m, [0.5, 1.0], ALPHA_SWEEP)
    assert val.points[-1].status == "infeasible" and math.isnan(test.points[-1].accuracy)
    assert val.to_csv().splitlines()[-1] == "alpha,1.0,nan,nan,nan,validation,infeasible"


def test_curve_csv_layout():
    m = random_moments(np.random.default_rng(0), 2, 2)
    val, _ = sweep(m, m, m, [0.0, 0.5], EPS_SWEEP)
    lines = val.to_csv().splitlines()
    assert lines[0] == "mode,constraint,accuracy,gap_0,gap_1,gap_inf,dataset_tag,status"
    assert len(lines) == 3 and lines[1].startswith("eps,0.0,")


def test_grid_must_be_sorted_and_nonempty():
    m = random_moments(np.random.default_rng(0))
    with pytest.raises(ValueError):
        sweep(m, m, m, [0.2, 0.1])
    with pytest.raises(ValueError):
        sweep(m, m, m, [])
    with pytest.raises(ValueError):
        fit_postprocessor(m, 0.1, "beta")


def test_default_grids():
    m = random_moments(np.random.default_rng(5))
    eps = default_eps_grid(m, 50)
    assert len(eps) == 51 and eps[0] == 0.0 and eps[1] == pytest.approx(1e-4 * eps[-1])
    alpha = default_alpha_grid(m, 50)
    assert len(alpha) == 50
    assert alpha[0] == pytest.approx(min(chance_accuracy(m), max_accuracy(m)))
    assert alpha[-1] == pytest.approx(max_accuracy(m))
