"""Empirical moments driving the post-processing LP, and the validation-set size bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, HappinessSpec


@dataclass(frozen=True, eq=False)
class EmpiricalMoments:
    """Everything the LP needs to know about a (classifier, data, happiness) triple.

    Attributes
    ----------
    p_yyz : ndarray, shape (K, K, 2)
        ``p_yyz[yhat, y, z]``, joint mass of soft prediction, true label and group.
    xi : ndarray, shape (K, K, 2, n)
        ``xi[ytilde, yhat, z]``, expected happiness coefficients so that the
        group-conditional expected happiness is ``sum xi[:, :, z] * pp[:, z, :].T``.
    p_z : ndarray, shape (2,)
    p_y_given_z : ndarray, shape (K, 2)
    counts : (int, int)
        Number of samples in group 0 and group 1.
    """

    p_yyz: np.ndarray
    xi: np.ndarray
    p_z: np.ndarray
    p_y_given_z: np.ndarray
    counts: tuple = (0, 0)

    def __post_init__(self):
        for name in ("p_yyz", "xi", "p_z", "p_y_given_z"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k = self.p_yyz.shape[0]
        if self.p_yyz.shape != (k, k, 2) or self.xi.shape[:3] != (k, k, 2):
            raise ValueError("inconsistent moment shapes")

    @property
    def n_labels(self) -> int:
        return self.p_yyz.shape[0]

    @property
    def dim(self) -> int:
        return self.xi.shape[3]

    def swap_groups(self) -> "EmpiricalMoments":
        return EmpiricalMoments(
            self.p_yyz[:, :, ::-1],
            self.xi[:, :, ::-1],
            self.p_z[::-1],
            self.p_y_given_z[:, ::-1],
            self.counts[::-1],
        )


def estimate_moments(dataset: Dataset, spec: HappinessSpec) -> EmpiricalMoments:
    """Soft-count estimates of the joint prediction/label/group law and of xi.

    Every sample contributes its full predicted distribution, weighted by
    ``p_hat(yhat)``, rather than its argmax.
    """
    if dataset.p_hat is None:
        raise ValueError("dataset has no soft predictions")
    k = len(dataset.label_space)
    n_total = len(dataset)
    counts = dataset.group_counts()
    if min(counts) == 0:
        raise ValueError(f"both groups must be present, got counts {counts}")
    p_hat, y, z = dataset.p_hat, dataset.y, dataset.z

    p_yyz = np.zeros((k, k, 2))
    for g in (0, 1):
        for label in range(k):
            mask = (z == g) & (y == label)
            p_yyz[:, label, g] = p_hat[mask].sum(axis=0) / n_total

    p_z = np.array(counts, dtype=float) / n_total
    p_y_given_z = np.zeros((k, 2))
    for g in (0, 1):
        p_y_given_z[:, g] = np.bincount(y[z == g], minlength=k) / counts[g]

    xi = np.zeros((k, k, 2, spec.dim))
    for g in (0, 1):
        mask = z == g
        x_g = {name: col[mask] for name, col in dataset.features.items()}
        y_g = y[mask]
        z_g = np.full(len(y_g), g)
        for yt in range(k):
            eta = spec.evaluate(np.full(len(y_g), yt), x_g, y_g, z_g)
            # (K, N_g) @ (N_g, n): sum over samples of p_hat(yhat) * eta
            xi[yt, :, g, :] = p_hat[mask].T @ eta / counts[g]
    return EmpiricalMoments(p_yyz, xi, p_z, p_y_given_z, counts)


def sample_size_bound(gamma: float, delta: float, C: float, n: int, y_count: int) -> int:
    """Per-group validation size D that puts every moment within ``delta`` w.p. ``1 - gamma``.

    Hoeffding plus a union bound over the ``2 (n + 1) |Y|^2`` estimated
    quantities, for happiness values confined to an interval of width ``C``.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not C >= 1:
        raise ValueError("C must be at least 1")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if int(y_count) != y_count or y_count < 2:
        raise ValueError("need at least two labels")
    value = C**2 / (2 * delta**2) * math.log(4 * (n + 1) * y_count**2 / gamma)
    return math.ceil(value)
