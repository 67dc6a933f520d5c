"""Dense two-phase primal simplex and the occupation-measure LP of one arm.

The solver handles ``maximize c @ x  s.t.  A @ x = b, x >= 0`` with Bland's
rule for both the entering and the leaving variable, so it terminates on
degenerate problems. The occupation LP is heavily degenerate (most states
carry no mass in most periods), which is why anti-cycling matters here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import SubProcessSpec

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-10
MASS_FLOOR = 1e-10

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Raised when an LP that must be solvable is reported infeasible or unbounded."""

    def __init__(self, status, lp=None):
        super().__init__(f"linear program is {status}")
        self.status = status
        self.lp = lp


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_labels: Optional[list] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError(f"inconsistent LP dimensions: c {self.c.shape}, "
                             f"A {self.A.shape}, b {self.b.shape}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A))
                and np.all(np.isfinite(self.b))):
            raise ValueError("LP data must be finite")

    def to_json(self) -> str:
        """Debug dump: objective, rows and right-hand side."""
        return json.dumps({
            "sense": "maximize",
            "objective": self.c.tolist(),
            "rows": self.A.tolist(),
            "rhs": self.b.tolist(),
            "row_labels": self.row_labels,
        })


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    objective: float = float("nan")
    basis: Optional[list] = field(default=None, repr=False)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    pivot_row = tab[row].copy()
    tab -= np.outer(tab[:, col], pivot_row)
    tab[row] = pivot_row


def _bland_loop(tab, basis, allowed, pivot_tol, max_iter):
    """Run simplex pivots on ``tab`` until optimal or unbounded.

    The last tableau row holds reduced costs ``c_j - c_B B^-1 A_j`` (enter when
    positive) and minus the objective value in its last column.
    """
    m = tab.shape[0] - 1
    iterations = 0
    while True:
        d = tab[m, allowed]
        improving = np.flatnonzero(d > pivot_tol)
        if improving.size == 0:
            return OPTIMAL, iterations
        col = allowed[improving[0]]
        column = tab[:m, col]
        rows = np.flatnonzero(column > pivot_tol)
        if rows.size == 0:
            return UNBOUNDED, iterations
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = min(ties, key=lambda i: basis[i])
        _pivot(tab, row, col)
        basis[row] = col
        iterations += 1
        if iterations > max_iter:
            raise RuntimeError("simplex iteration cap exceeded")


def simplex_solve(lp: LinearProgram, feas_tol: float = FEAS_TOL,
                  pivot_tol: float = PIVOT_TOL) -> LpSolution:
    """Solve ``lp`` to a basic optimal solution, or report why not.

    Duals ``y`` satisfy ``A.T @ y >= c`` at optimality and ``b @ y`` equals the
    optimum. Rows found redundant in phase one get a zero dual.
    """
    A, b, c = lp.A.copy(), lp.b.copy(), lp.c
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    max_iter = 50 * (m + n) + 1000

    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    # phase one maximizes minus the sum of artificials
    tab[m, :n] = A.sum(axis=0)
    tab[m, -1] = b.sum()
    basis = list(range(n, n + m))
    status, it1 = _bland_loop(tab, basis, np.arange(n + m), pivot_tol, max_iter)
    if tab[m, -1] > feas_tol:
        return LpSolution(INFEASIBLE, iterations=it1)

    keep = []
    for i in range(m):
        if basis[i] < n:
            keep.append(i)
            continue
        candidates = np.flatnonzero(np.abs(tab[i, :n]) > pivot_tol)
        if candidates.size:
            _pivot(tab, i, candidates[0])
            basis[i] = int(candidates[0])
            keep.append(i)
    keep = np.array(keep, dtype=int)
    basis = [basis[i] for i in keep]

    tab2 = np.zeros((len(keep) + 1, n + 1))
    tab2[:-1, :n] = tab[keep, :n]
    tab2[:-1, -1] = tab[keep, -1]
    cb = c[basis]
    tab2[-1, :n] = c - cb @ tab2[:-1, :n]
    tab2[-1, -1] = -cb @ tab2[:-1, -1]
    status, it2 = _bland_loop(tab2, basis, np.arange(n), pivot_tol, max_iter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=it1 + it2)

    # refactor from the original data to shed accumulated pivot error
    B = lp.A[keep][:, basis]
    x = np.zeros(n)
    if len(basis):
        x[basis] = np.linalg.solve(B, lp.b[keep])
    y = np.zeros(m)
    if len(basis):
        y[keep] = np.linalg.solve(B.T, c[basis])
    return LpSolution(OPTIMAL, x, y, float(c @ x), list(basis), it1 + it2)


def complementary_slackness_residual(lp: LinearProgram, sol: LpSolution) -> float:
    reduced = lp.c - lp.A.T @ sol.y
    return float(np.abs(sol.x * reduced).sum())


# --- occupation measure -----------------------------------------------------

def _var(S, s, a, t):
    return (t * S + s) * 2 + a


def build_occupation_lp(spec: SubProcessSpec, lam_star, alpha) -> LinearProgram:
    """Occupation-measure LP with pull reward reduced by ``lam_star``.

    Variables are ``rho(s, a, t)`` flattened as ``(t * S + s) * 2 + a``.
    Rows: one budget row per period, then for every period one row per state
    (the start distribution at t=1, flow balance afterwards).
    """
    S, T = spec.num_states, spec.horizon
    lam_star = np.asarray(lam_star, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if lam_star.shape != (T,) or alpha.shape != (T,):
        raise ValueError(f"multipliers and fractions must have length {T}")
    n = 2 * S * T
    r = spec.reward.copy()
    r[:, :, 1] -= lam_star[:, None]
    c = r.reshape(-1)  # (t, s, a) order matches _var
    A = np.zeros((T + S * T, n))
    b = np.zeros(T + S * T)
    labels = []
    for t in range(T):
        for s in range(S):
            A[t, _var(S, s, 1, t)] = 1.0
        b[t] = alpha[t]
        labels.append(f"budget t={t + 1}")
    K = spec.kernels
    row = T
    for t in range(T):
        for s in range(S):
            A[row, _var(S, s, 0, t)] = 1.0
            A[row, _var(S, s, 1, t)] = 1.0
            if t == 0:
                b[row] = float(s == spec.initial_state)
                labels.append(f"start s={s}")
            else:
                for s_prev in range(S):
                    for a in (0, 1):
                        A[row, _var(S, s_prev, a, t - 1)] -= K[a, s_prev, s]
                labels.append(f"flow s={s} t={t + 1}")
            row += 1
    return LinearProgram(c, A, b, labels)


def rho_from_vector(x, num_states, horizon) -> np.ndarray:
    """Reshape an LP primal vector to ``rho[s, a, t]``."""
    return np.asarray(x).reshape(horizon, num_states, 2).transpose(1, 2, 0).copy()


@dataclass
class OccupationSolution:
    rho: np.ndarray
    objective: float
    budget_duals: np.ndarray
    lp: LinearProgram
    solution: LpSolution


def solve_occupation_lp(spec: SubProcessSpec, alpha, lam_star=None) -> OccupationSolution:
    """Solve the occupation LP; ``lam_star=None`` uses the unadjusted rewards."""
    T = spec.horizon
    lam = np.zeros(T) if lam_star is None else np.asarray(lam_star, dtype=float)
    lp = build_occupation_lp(spec, lam, alpha)
    sol = simplex_solve(lp)
    if not sol.optimal:
        raise LpError(sol.status, lp)
    rho = rho_from_vector(sol.x, spec.num_states, T)
    return OccupationSolution(rho, sol.objective, sol.y[:T].copy(), lp, sol)


def multipliers_from_lp(spec: SubProcessSpec, alpha) -> np.ndarray:
    """Minimizing multipliers of the Lagrangian bound, read off the budget-row duals.

    With unadjusted rewards, the dual of period t's budget row is the pull
    price making the per-arm bound ``Q(lam) + alpha @ lam`` equal to the LP
    optimum.
    """
    return solve_occupation_lp(spec, alpha).budget_duals


def extract_policy(rho, beta, lam_star, mass_floor: float = MASS_FLOOR) -> np.ndarray:
    """Randomized policy from an optimal occupation measure.

    Where a state carries mass the policy is the conditional action frequency;
    where it carries none, pull iff the state's index is at least the period's
    multiplier.
    """
    rho = np.asarray(rho, dtype=float)
    beta = np.asarray(beta, dtype=float)
    lam_star = np.asarray(lam_star, dtype=float)
    S, _, T = rho.shape
    mass = rho.sum(axis=1)
    policy = np.zeros_like(rho)
    has_mass = mass > mass_floor
    safe = np.where(has_mass, mass, 1.0)
    p1 = np.clip(rho[:, 1, :] / safe, 0.0, 1.0)
    fallback = (beta >= lam_star[None, :]).astype(float)
    policy[:, 1, :] = np.where(has_mass, p1, fallback)
    policy[:, 0, :] = 1.0 - policy[:, 1, :]
    return policy
