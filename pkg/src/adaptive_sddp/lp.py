"""Linear programs with duals: the reference revised simplex and stage subproblem builder.

Every LP handled here has the shape

    min  c'x
    s.t. A_eq x  = b_eq      (duals lambda, free sign)
         G x    >= h         (duals rho >= 0)
         x_i >= 0 except for the indices in ``free_vars``

which is exactly what a stage subproblem with an epigraph variable and a
block of cut rows looks like.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPNumericalError(RuntimeError):
    """The simplex hit its iteration limit without reaching a terminal basis."""


@dataclass
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    ineq_matrix: np.ndarray = None
    ineq_rhs: np.ndarray = None
    free_vars: Tuple[int, ...] = ()

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.shape[0]
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, n)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        if self.ineq_matrix is None:
            self.ineq_matrix = np.zeros((0, n))
            self.ineq_rhs = np.zeros(0)
        self.ineq_matrix = np.asarray(self.ineq_matrix, dtype=float).reshape(-1, n)
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float).ravel()
        self.free_vars = tuple(int(i) for i in self.free_vars)
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("eq_matrix and eq_rhs disagree on the number of rows")
        if self.ineq_matrix.shape[0] != self.ineq_rhs.shape[0]:
            raise ValueError("ineq_matrix and ineq_rhs disagree on the number of rows")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]


@dataclass
class LpSolution:
    status: LPStatus
    objective_value: float = float("nan")
    primal: Optional[np.ndarray] = None
    eq_duals: Optional[np.ndarray] = None
    ineq_duals: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LPStatus.OPTIMAL


# pricing / ratio-test tolerances, scaled by data magnitude inside solve_lp
_OPT_TOL = 1e-9
_FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11
_REFACTOR_EVERY = 64
_DEGENERATE_SWITCH = 40


class _Simplex:
    def __init__(self, M: np.ndarray, rhs: np.ndarray, basis: np.ndarray, n_real: int):
        self.M = M
        self.rhs = rhs
        self.basis = basis
        self.n_real = n_real  # columns >= n_real are artificial
        self.iterations = 0
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.M[:, self.basis])
        self.xB = self.Binv @ self.rhs
        self.since_refactor = 0

    def pivot(self, r: int, j: int, u: np.ndarray):
        piv = u[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        step = self.xB[r] / piv
        self.xB -= step * u
        self.xB[r] = step
        self.basis[r] = j
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= _REFACTOR_EVERY:
            self.refactor()

    def run(self, cost: np.ndarray, allowed: np.ndarray, opt_tol: float, max_iter: int) -> str:
        """Minimise ``cost`` from the current basis; return 'optimal' or 'unbounded'."""
        bland = False
        degenerate = 0
        while True:
            if self.iterations > max_iter:
                raise LPNumericalError(f"simplex iteration limit {max_iter} reached")
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            if bland:
                cands = np.flatnonzero(d < -opt_tol)
                if cands.size == 0:
                    return "optimal"
                j = int(cands[0])
            else:
                j = int(np.argmin(d))
                if d[j] >= -opt_tol:
                    return "optimal"
            u = self.Binv @ self.M[:, j]
            pos = u > _PIVOT_TOL * max(1.0, np.abs(u).max())
            if not pos.any():
                return "unbounded"
            xb = np.maximum(self.xB, 0.0)
            ratios = np.full(u.shape, np.inf)
            ratios[pos] = xb[pos] / u[pos]
            tmin = ratios.min()
            ties = np.flatnonzero(ratios <= tmin + 1e-12 * max(1.0, tmin))
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(u[ties])])
            if tmin <= 1e-12:
                degenerate += 1
                if degenerate > _DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j, u)


def solve_lp(lp: LinearProgram, max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``lp`` with a two-phase revised simplex.

    Pricing is Dantzig's rule, switching to Bland's rule after a run of
    degenerate pivots, so the terminal basis (and therefore the dual vector
    returned) is a deterministic function of the input.
    """
    c = lp.objective
    n = lp.n_vars
    m_eq = lp.eq_matrix.shape[0]
    m_in = lp.ineq_matrix.shape[0]
    rows = m_eq + m_in
    free = list(lp.free_vars)

    # columns: x (n) | surplus for >= rows (m_in) | negative parts of free vars
    n_cols = n + m_in + len(free)
    M = np.zeros((rows, n_cols))
    M[:m_eq, :n] = lp.eq_matrix
    M[m_eq:, :n] = lp.ineq_matrix
    M[m_eq:, n : n + m_in] = -np.eye(m_in)
    for k, i in enumerate(free):
        M[:, n + m_in + k] = -M[:, i]
    cost = np.zeros(n_cols)
    cost[:n] = c
    for k, i in enumerate(free):
        cost[n + m_in + k] = -c[i]
    rhs = np.concatenate([lp.eq_rhs, lp.ineq_rhs])

    sign = np.where(rhs < 0, -1.0, 1.0)
    M *= sign[:, None]
    rhs = rhs * sign

    # surplus columns whose row was flipped have +1 and can start in the basis
    basis = np.empty(rows, dtype=np.int64)
    art_rows = []
    for i in range(rows):
        if i >= m_eq and sign[i] < 0:
            basis[i] = n + (i - m_eq)
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    if n_art:
        art = np.zeros((rows, n_art))
        art[art_rows, np.arange(n_art)] = 1.0
        M = np.hstack([M, art])
        basis[art_rows] = n_cols + np.arange(n_art)
    total = M.shape[1]
    if max_iter is None:
        max_iter = 50 * (rows + total) + 1000

    scale_c = max(1.0, float(np.abs(c).max(initial=0.0)))
    scale_b = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    opt_tol = _OPT_TOL * scale_c

    if rows == 0:
        # no constraints: bounded iff every column is nonnegative-cost and non-free
        if np.any(cost < -opt_tol) or any(abs(c[i]) > opt_tol for i in free):
            return LpSolution(LPStatus.UNBOUNDED)
        return LpSolution(LPStatus.OPTIMAL, 0.0, np.zeros(n), np.zeros(0), np.zeros(0))

    sx = _Simplex(M, rhs, basis, n_cols)

    if n_art:
        cost1 = np.zeros(total)
        cost1[n_cols:] = 1.0
        allowed = np.ones(total, dtype=bool)
        sx.run(cost1, allowed, _OPT_TOL, max_iter)
        infeas = float(cost1[sx.basis] @ sx.xB)
        if infeas > _FEAS_TOL * scale_b * max(1, rows):
            return LpSolution(LPStatus.INFEASIBLE, iterations=sx.iterations)
        # pivot artificials out of the basis where a real column can replace them
        for r in range(rows):
            if sx.basis[r] >= n_cols:
                w = sx.Binv[r] @ M[:, :n_cols]
                w[sx.basis[sx.basis < n_cols]] = 0.0
                j = int(np.argmax(np.abs(w)))
                if abs(w[j]) > 1e-9:
                    u = sx.Binv @ M[:, j]
                    sx.pivot(r, j, u)
        sx.refactor()

    cost2 = np.zeros(total)
    cost2[:n_cols] = cost
    allowed = np.zeros(total, dtype=bool)
    allowed[:n_cols] = True
    status = sx.run(cost2, allowed, opt_tol, max_iter)
    if status == "unbounded":
        return LpSolution(LPStatus.UNBOUNDED, iterations=sx.iterations)

    sx.refactor()
    z = np.zeros(total)
    z[sx.basis] = np.maximum(sx.xB, 0.0)
    x = z[:n].copy()
    for k, i in enumerate(free):
        x[i] -= z[n + m_in + k]
    y = (cost2[sx.basis] @ sx.Binv) * sign
    value = float(c @ x)
    return LpSolution(
        LPStatus.OPTIMAL,
        value,
        x,
        y[:m_eq].copy(),
        y[m_eq:].copy(),
        sx.iterations,
    )


def build_stage_subproblem(
    cost_c: np.ndarray,
    recourse_A: np.ndarray,
    tech_B: np.ndarray,
    rhs_b: np.ndarray,
    incoming_state: np.ndarray,
    cut_betas: Optional[np.ndarray] = None,
    cut_alphas: Optional[np.ndarray] = None,
    weight: float = 1.0,
) -> LinearProgram:
    """Stage subproblem for one realization (``weight = 1``) or one aggregated cluster.

    Variables are ``x_t`` followed, when cuts are supplied, by the free epigraph
    variable ``r``. Each cut row reads ``r - beta_j'x_t >= weight * alpha_j``.
    Passing ``cut_betas=None`` omits ``r`` entirely (last stage, or a myopic solve).
    """
    A = recourse_A
    m, n = A.shape
    x_in = np.asarray(incoming_state, dtype=float).ravel()
    if tech_B.shape != (m, x_in.shape[0]):
        raise ValueError(f"technology matrix {tech_B.shape} incompatible with state of length {x_in.shape[0]}")
    rhs = rhs_b - tech_B @ x_in if x_in.size else np.array(rhs_b, dtype=float)
    if cut_betas is None:
        return LinearProgram(cost_c, A, rhs)
    betas = np.atleast_2d(cut_betas)
    if betas.shape[1] != n:
        raise ValueError(f"cut coefficients of length {betas.shape[1]} do not match n_vars {n}")
    obj = np.append(cost_c, 1.0)
    eq = np.hstack([A, np.zeros((m, 1))])
    G = np.hstack([-betas, np.ones((betas.shape[0], 1))])
    return LinearProgram(obj, eq, rhs, G, weight * np.asarray(cut_alphas, dtype=float), free_vars=(n,))
