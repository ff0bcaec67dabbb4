"""Applying post-processors, evaluating them, and sweeping accuracy/fairness trade-offs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import EmpiricalMoments
from .lp import (
    INFEASIBLE,
    OPTIMAL,
    PostProcessor,
    build_fair_lp,
    build_gap_lp,
    extract_postprocessor,
    solve_lp,
)

EPS_SWEEP = "eps"
ALPHA_SWEEP = "alpha"
VALIDATION = "validation"
TEST = "test"


def apply(pp: PostProcessor, p_hat, z: int) -> np.ndarray:
    """Distribution of the post-processed label given the classifier's distribution."""
    p_hat = np.asarray(p_hat, dtype=float)
    return p_hat @ pp.table[:, z, :]


def expected_loss(pp: PostProcessor, m: EmpiricalMoments) -> float:
    # sum over (yhat, y, z) of p_yyz(yhat, y, z) * pp(y | yhat, z)
    correct = np.einsum("hyz,hzy->", m.p_yyz, pp.table)
    return float(1.0 - correct)


def accuracy(pp: PostProcessor, m: EmpiricalMoments) -> float:
    return 1.0 - expected_loss(pp, m)


def group_happiness(pp: PostProcessor, m: EmpiricalMoments) -> np.ndarray:
    """Expected happiness per group, shape ``(2, n)``."""
    # xi[t, h, z, i] * table[h, z, t]
    return np.einsum("thzi,hzt->zi", m.xi, pp.table)


def happiness_gap(pp: PostProcessor, m: EmpiricalMoments) -> np.ndarray:
    """Group 0 minus group 1 expected happiness, componentwise."""
    per_group = group_happiness(pp, m)
    return per_group[0] - per_group[1]


def sample_label(pp: PostProcessor, p_hat, z: int, rng_seed) -> int:
    """Draw ``yhat ~ p_hat`` and then the final label from the post-processor row."""
    rng = np.random.default_rng(rng_seed)
    p_hat = np.asarray(p_hat, dtype=float)
    yhat = rng.choice(len(p_hat), p=p_hat)
    row = pp.table[yhat, z]
    return int(rng.choice(len(row), p=row))


# -- trade-off curves ---------------------------------------------------------


@dataclass(frozen=True)
class TradeoffPoint:
    constraint_value: float
    accuracy: float
    gap: tuple
    gap_inf_norm: float
    status: str = OPTIMAL
    objective: float = math.nan


@dataclass(frozen=True)
class TradeoffCurve:
    mode: str
    dataset_tag: str
    points: tuple = field(default=())
    dim: int = 1

    def accuracies(self) -> np.ndarray:
        return np.array([p.accuracy for p in self.points])

    def gaps(self) -> np.ndarray:
        return np.array([p.gap_inf_norm for p in self.points])

    def feasible(self) -> list:
        return [p for p in self.points if p.status == OPTIMAL]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["mode", "constraint", "accuracy"]
            + [f"gap_{i}" for i in range(self.dim)]
            + ["gap_inf", "dataset_tag", "status"]
        )
        for p in self.points:
            writer.writerow(
                [self.mode, _fmt(p.constraint_value), _fmt(p.accuracy)]
                + [_fmt(g) for g in p.gap]
                + [_fmt(p.gap_inf_norm), self.dataset_tag, p.status]
            )
        return out.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _point(value, pp, m, objective):
    gap = happiness_gap(pp, m)
    return TradeoffPoint(
        float(value), accuracy(pp, m), tuple(float(g) for g in gap),
        float(np.abs(gap).max()), OPTIMAL, objective,
    )


def fit_postprocessor(m: EmpiricalMoments, value: float, mode: str = EPS_SWEEP):
    """Solve one LP; returns ``(post_processor or None, solution)``."""
    if mode == EPS_SWEEP:
        lp = build_fair_lp(m, value)
    elif mode == ALPHA_SWEEP:
        lp = build_gap_lp(m, value)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        return None, sol
    return extract_postprocessor(lp, sol), sol


def sweep(m_fit: EmpiricalMoments, m_eval_val: EmpiricalMoments, m_eval_test: EmpiricalMoments,
          grid, mode: str = EPS_SWEEP):
    """Solve the LP on ``m_fit`` for each grid value, evaluate on both evaluation sets.

    ``m_fit`` carries the happiness function being enforced, the evaluation
    moments the one being reported. Returns ``(validation_curve, test_curve)``;
    grid values whose LP is infeasible appear with status ``infeasible``.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted")
    val_points, test_points = [], []
    for value in grid:
        pp, sol = fit_postprocessor(m_fit, value, mode)
        if pp is None:
            if sol.status != INFEASIBLE:
                raise RuntimeError(f"LP at {mode}={value} is {sol.status}")
            nan_gap = (math.nan,) * m_eval_val.dim
            blank = TradeoffPoint(value, math.nan, nan_gap, math.nan, sol.status)
            val_points.append(blank)
            test_points.append(blank)
            continue
        val_points.append(_point(value, pp, m_eval_val, sol.objective))
        test_points.append(_point(value, pp, m_eval_test, sol.objective))
    return (
        TradeoffCurve(mode, VALIDATION, tuple(val_points), m_eval_val.dim),
        TradeoffCurve(mode, TEST, tuple(test_points), m_eval_test.dim),
    )


def default_eps_grid(m_fit: EmpiricalMoments, size: int = 50, include_zero: bool = True) -> list:
    """Log-spaced from 1e-4 of the unconstrained optimum's gap up to that gap, after 0."""
    pp, _ = fit_postprocessor(m_fit, math.inf, EPS_SWEEP)
    top = float(np.abs(happiness_gap(pp, m_fit)).max())
    if top == 0.0:
        return [0.0]
    grid = [float(g) for g in np.geomspace(1e-4 * top, top, size)]
    return [0.0] + grid if include_zero else grid


def chance_accuracy(m: EmpiricalMoments) -> float:
    """Accuracy of always predicting the most frequent label."""
    return float(m.p_yyz.sum(axis=(0, 2)).max())


def max_accuracy(m: EmpiricalMoments) -> float:
    _, sol = fit_postprocessor(m, math.inf, EPS_SWEEP)
    return 1.0 - sol.objective


def default_alpha_grid(m_fit: EmpiricalMoments, size: int = 50) -> list:
    lo, hi = chance_accuracy(m_fit), max_accuracy(m_fit)
    return [float(a) for a in np.linspace(min(lo, hi), hi, size)]
