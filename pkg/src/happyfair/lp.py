"""Linear programs for fair post-processing and a dense two-phase simplex solver.

Post-processor variables ``v(ytilde | yhat, z)`` are laid out
lexicographically in ``(ytilde, yhat, z)``; see :func:`var_index`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import EmpiricalMoments

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
EXTRACT_TOL = 1e-6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """The simplex method did not terminate within its iteration budget."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min c.v + offset`` s.t. ``A_ub v <= b_ub``, ``A_eq v = b_eq``, ``0 <= v <= upper``.

    Rows of ``A_ub`` whose bound is ``+inf`` are vacuous and ignored by the
    solver. ``upper`` entries may be ``inf``.
    """

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    upper: np.ndarray | None = None
    offset: float = 0.0
    n_labels: int = 0
    has_gap_var: bool = False
    row_names: tuple = field(default=())

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        nv = len(c)

        def block(a, b):
            b = np.asarray(b, dtype=float).reshape(-1)
            a = np.asarray(a, dtype=float).reshape(len(b), nv)
            return a, b

        a_ub, b_ub = block(self.A_ub, self.b_ub)
        a_eq, b_eq = block(self.A_eq, self.b_eq)
        upper = np.full(nv, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if upper.shape != (nv,):
            raise ValueError("upper bounds must match the variable count")
        for name, arr in dict(c=c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, upper=upper).items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def var_count(self) -> int:
        return len(self.c)

    def to_lp_text(self) -> str:
        """Dump in CPLEX LP text format, for cross-checking with external solvers."""

        def terms(row):
            parts = []
            for j, a in enumerate(row):
                if a != 0:
                    sign = "-" if a < 0 else "+"
                    parts.append(f"{sign} {abs(a):.17g} {self.var_name(j)}")
            return " ".join(parts) if parts else "0 " + self.var_name(0)

        lines = ["\\ offset " + repr(float(self.offset)), "Minimize", " obj: " + terms(self.c)]
        lines.append("Subject To")
        for i, (row, b) in enumerate(zip(self.A_ub, self.b_ub)):
            if np.isfinite(b):
                lines.append(f" ub{i}: {terms(row)} <= {b:.17g}")
        for i, (row, b) in enumerate(zip(self.A_eq, self.b_eq)):
            lines.append(f" eq{i}: {terms(row)} = {b:.17g}")
        lines.append("Bounds")
        for j, u in enumerate(self.upper):
            hi = f"{u:.17g}" if np.isfinite(u) else "+inf"
            lines.append(f" 0 <= {self.var_name(j)} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def var_name(self, j: int) -> str:
        k = self.n_labels
        if k and j < 2 * k * k:
            yt, yh, z = var_triple(j, k)
            return f"v_{yt}_{yh}_{z}"
        if self.has_gap_var and j == self.var_count - 1:
            return "t"
        return f"x{j}"


@dataclass(frozen=True, eq=False)
class LPSolution:
    values: np.ndarray | None
    objective: float
    status: str
    basis: tuple = ()
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class PostProcessor:
    """Group-dependent randomised relabelling, ``table[yhat, z, ytilde]``."""

    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        k = table.shape[0]
        if table.shape != (k, 2, k):
            raise ValueError(f"table must have shape (K, 2, K), got {table.shape}")
        if np.any(table < 0) or np.any(np.abs(table.sum(axis=2) - 1) > 1e-8):
            raise ValueError("post-processor rows must be probability vectors")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n_labels(self) -> int:
        return self.table.shape[0]

    def row(self, yhat: int, z: int) -> np.ndarray:
        return self.table[yhat, z]

    @classmethod
    def identity(cls, k: int) -> "PostProcessor":
        return cls(np.repeat(np.eye(k)[:, None, :], 2, axis=1))

    @classmethod
    def uniform(cls, k: int) -> "PostProcessor":
        return cls(np.full((k, 2, k), 1.0 / k))

    @classmethod
    def from_maps(cls, map0, map1, k: int) -> "PostProcessor":
        """Deterministic relabelling ``yhat -> map_z[yhat]`` per group."""
        table = np.zeros((k, 2, k))
        for z, mapping in enumerate((map0, map1)):
            for yh, yt in enumerate(mapping):
                table[yh, z, yt] = 1.0
        return cls(table)


# -- variable layout ----------------------------------------------------------


def var_index(yt: int, yh: int, z: int, k: int) -> int:
    return (yt * k + yh) * 2 + z


def var_triple(j: int, k: int) -> tuple:
    z = j % 2
    yh = (j // 2) % k
    yt = j // (2 * k)
    return yt, yh, z


def _accuracy_row(m: EmpiricalMoments, nv: int) -> np.ndarray:
    """Coefficients of sum p_yyz(yhat, y, z) v(y | yhat, z)."""
    k = m.n_labels
    row = np.zeros(nv)
    for y in range(k):
        for yh in range(k):
            for z in (0, 1):
                row[var_index(y, yh, z, k)] = m.p_yyz[yh, y, z]
    return row


def _gap_rows(m: EmpiricalMoments, nv: int) -> np.ndarray:
    """Rows g_i with g_i . v = expected happiness of group 0 minus group 1."""
    k, n = m.n_labels, m.dim
    rows = np.zeros((n, nv))
    for yt in range(k):
        for yh in range(k):
            rows[:, var_index(yt, yh, 0, k)] = m.xi[yt, yh, 0]
            rows[:, var_index(yt, yh, 1, k)] = -m.xi[yt, yh, 1]
    return rows


def _stochastic_rows(k: int, nv: int) -> np.ndarray:
    rows = np.zeros((2 * k, nv))
    for yh in range(k):
        for z in (0, 1):
            for yt in range(k):
                rows[yh * 2 + z, var_index(yt, yh, z, k)] = 1.0
    return rows


def build_fair_lp(m: EmpiricalMoments, epsilon: float) -> LinearProgram:
    """Minimum expected 0-1 loss over post-processors whose happiness gap is within ``epsilon``.

    ``epsilon = inf`` keeps the fairness rows but makes them vacuous.
    """
    if not epsilon >= 0:
        raise ValueError("epsilon must be non-negative")
    k = m.n_labels
    nv = 2 * k * k
    c = -_accuracy_row(m, nv)
    gap = _gap_rows(m, nv)
    a_ub = np.vstack([gap, -gap])
    b_ub = np.full(2 * m.dim, float(epsilon))
    a_eq = _stochastic_rows(k, nv)
    return LinearProgram(
        c, a_ub, b_ub, a_eq, np.ones(2 * k), np.ones(nv), offset=1.0, n_labels=k
    )


def build_gap_lp(m: EmpiricalMoments, alpha: float) -> LinearProgram:
    """Smallest sup-norm happiness gap ``t`` over post-processors with accuracy >= ``alpha``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    k = m.n_labels
    nv = 2 * k * k + 1
    gap = _gap_rows(m, nv)
    t_col = np.zeros((m.dim, nv))
    t_col[:, -1] = 1.0
    acc = _accuracy_row(m, nv)
    a_ub = np.vstack([gap - t_col, -gap - t_col, -acc[None, :]])
    b_ub = np.concatenate([np.zeros(2 * m.dim), [-float(alpha)]])
    a_eq = _stochastic_rows(k, nv)
    c = np.zeros(nv)
    c[-1] = 1.0
    upper = np.ones(nv)
    upper[-1] = np.inf
    return LinearProgram(c, a_ub, b_ub, a_eq, np.ones(2 * k), upper, n_labels=k, has_gap_var=True)


# -- simplex ----------------------------------------------------------------


class _Tableau:
    """Dense simplex tableau; last row holds reduced costs, last column the rhs."""

    def __init__(self, a, b, basis):
        m, n = a.shape
        self.t = np.zeros((m + 1, n + 1))
        self.t[:m, :n] = a
        self.t[:m, n] = b
        self.basis = list(basis)
        self.iterations = 0

    def set_costs(self, c):
        m = len(self.basis)
        t = self.t
        t[m, :] = 0.0
        t[m, : len(c)] = c
        for i, j in enumerate(self.basis):
            if c[j] != 0:
                t[m, :] -= c[j] * t[i, :]

    def pivot(self, r, col):
        t = self.t
        t[r, :] /= t[r, col]
        for i in range(t.shape[0]):
            if i != r and t[i, col] != 0.0:
                t[i, :] -= t[i, col] * t[r, :]
        self.basis[r] = col

    def run(self, n_active, max_iter):
        """Bland's rule iterations over the first ``n_active`` columns."""
        t = self.t
        m = len(self.basis)
        while True:
            costs = t[m, :n_active]
            candidates = np.flatnonzero(costs < -OPT_TOL)
            if candidates.size == 0:
                return OPTIMAL
            col = int(candidates[0])
            column = t[:m, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = t[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + FEAS_TOL * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            if self.iterations >= max_iter:
                raise SolverError(f"simplex exceeded {max_iter} iterations")
            self.pivot(r, col)
            self.iterations += 1


def _standard_form(lp: LinearProgram):
    """Rows ``a x + slack = b`` with ``b >= 0``, equilibrated row by row.

    Returns ``(a, b, n_struct, n_slack, needs_artificial)`` or raises
    ``_Infeasible`` when a zero row is violated.
    """
    nv = lp.var_count
    rows, rhs, kinds = [], [], []
    for a, b in zip(lp.A_ub, lp.b_ub):
        if b == math.inf:
            continue
        rows.append(a)
        rhs.append(b)
        kinds.append("ub")
    for j, u in enumerate(lp.upper):
        if np.isfinite(u):
            a = np.zeros(nv)
            a[j] = 1.0
            rows.append(a)
            rhs.append(u)
            kinds.append("ub")
    for a, b in zip(lp.A_eq, lp.b_eq):
        rows.append(a)
        rhs.append(b)
        kinds.append("eq")

    keep_rows, keep_rhs, keep_kinds = [], [], []
    for a, b, kind in zip(rows, rhs, kinds):
        scale = np.abs(a).max() if len(a) else 0.0
        if scale == 0.0:
            violated = b < -FEAS_TOL if kind == "ub" else abs(b) > FEAS_TOL
            if violated:
                raise _Infeasible
            continue
        keep_rows.append(a / scale)
        keep_rhs.append(b / scale)
        keep_kinds.append(kind)

    m = len(keep_rows)
    n_slack = sum(k == "ub" for k in keep_kinds)
    a = np.zeros((m, nv + n_slack))
    b = np.array(keep_rhs, dtype=float)
    s = 0
    for i, (row, kind) in enumerate(zip(keep_rows, keep_kinds)):
        a[i, :nv] = row
        if kind == "ub":
            a[i, nv + s] = 1.0
            s += 1
    basis = [None] * m
    s = 0
    for i, kind in enumerate(keep_kinds):
        if kind == "ub":
            if b[i] >= 0:
                basis[i] = nv + s
            s += 1
        if b[i] < 0:
            a[i] = -a[i]
            b[i] = -b[i]
    return a, b, nv, basis


class _Infeasible(Exception):
    pass


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LPSolution:
    """Two-phase dense simplex with Bland's anti-cycling rule.

    All variables are non-negative. Infeasible and unbounded programs are
    reported through ``status``; exceeding the iteration budget
    (default ``10 (rows + cols)^2``) raises :class:`SolverError`.
    """
    try:
        a, b, nv, basis = _standard_form(lp)
    except _Infeasible:
        return LPSolution(None, math.nan, INFEASIBLE)
    m, n = a.shape
    if max_iter is None:
        max_iter = 10 * (m + n) ** 2

    # phase 1: artificials for rows without a ready basic slack
    need = [i for i in range(m) if basis[i] is None]
    a1 = np.hstack([a, np.zeros((m, len(need)))])
    for k, i in enumerate(need):
        a1[i, n + k] = 1.0
        basis[i] = n + k
    tab = _Tableau(a1, b, basis)
    if need:
        c1 = np.zeros(n + len(need))
        c1[n:] = 1.0
        tab.set_costs(c1)
        tab.run(n + len(need), max_iter)
        if -tab.t[m, -1] > FEAS_TOL * max(1.0, np.abs(b).max()):
            return LPSolution(None, math.nan, INFEASIBLE, iterations=tab.iterations)
        # drive remaining artificials out; rows that cannot pivot are redundant
        redundant = []
        for r in range(m):
            if tab.basis[r] >= n:
                cols = np.flatnonzero(np.abs(tab.t[r, :n]) > PIVOT_TOL)
                if cols.size:
                    tab.pivot(r, int(cols[0]))
                else:
                    redundant.append(r)
        if redundant:
            keep = [r for r in range(m) if r not in redundant]
            tab.t = np.vstack([tab.t[keep], tab.t[-1:]])
            tab.basis = [tab.basis[r] for r in keep]
            a, b = a[keep], b[keep]
            m = len(keep)
        tab.t = np.hstack([tab.t[:, :n], tab.t[:, -1:]])

    c = np.zeros(n)
    c[:nv] = lp.c
    tab.set_costs(c)
    status = tab.run(n, max_iter)
    if status == UNBOUNDED:
        return LPSolution(None, -math.inf, UNBOUNDED, tuple(tab.basis), tab.iterations)

    x = np.zeros(n)
    x[tab.basis] = tab.t[:m, -1]
    # re-solve for the basic values from the original data to shed tableau drift
    if m:
        try:
            x_b = np.linalg.solve(a[:, tab.basis], b)
            if np.all(np.isfinite(x_b)) and np.abs(x_b - x[tab.basis]).max() < 1e-6:
                x[tab.basis] = x_b
        except np.linalg.LinAlgError:
            pass
    x[np.abs(x) < 1e-15] = 0.0
    values = x[:nv]
    objective = float(lp.c @ values + lp.offset)
    return LPSolution(values, objective, OPTIMAL, tuple(tab.basis), tab.iterations)


def residuals(lp: LinearProgram, values) -> float:
    """Largest constraint or bound violation of ``values``."""
    v = np.asarray(values, dtype=float)
    if v.shape != (lp.var_count,):
        return math.inf
    worst = max(0.0, -v.min(initial=0.0), (v - lp.upper).max(initial=0.0))
    finite = np.isfinite(lp.b_ub)
    if finite.any():
        worst = max(worst, (lp.A_ub[finite] @ v - lp.b_ub[finite]).max())
    if len(lp.b_eq):
        worst = max(worst, np.abs(lp.A_eq @ v - lp.b_eq).max())
    return float(worst)


def extract_postprocessor(lp: LinearProgram, sol: LPSolution) -> PostProcessor:
    """Reshape an optimal solution into per-(yhat, z) probability rows."""
    if sol.status != OPTIMAL:
        raise ValueError(f"cannot extract a post-processor from a {sol.status} solution")
    k = lp.n_labels
    v = np.array(sol.values[: 2 * k * k], dtype=float)
    if v.min() < -FEAS_TOL:
        raise ValueError(f"solution has a negative probability {v.min():.3g}")
    v[v < 0] = 0.0
    # v is laid out as (ytilde, yhat, z); the table is (yhat, z, ytilde)
    table = v.reshape(k, k, 2).transpose(1, 2, 0).copy()
    sums = table.sum(axis=2)
    if np.abs(sums - 1).max() > EXTRACT_TOL:
        raise ValueError(f"post-processor row sums deviate from 1 by {np.abs(sums - 1).max():.3g}")
    table /= sums[:, :, None]
    return PostProcessor(table)
