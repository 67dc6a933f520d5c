"""State/period indices: the highest period-t pull price at which pulling stays optimal.

Only the period-t multiplier is perturbed, so the search runs over the ray
``lam_star + (beta - lam_star[t]) e_t``. Optimal pulling is monotone along that
ray, which is what makes bisection valid.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import dp
from .model import SubProcessSpec

DEFAULT_TOL = 1e-6
MAX_ITER = 60


def substitute(lam, t: int, value: float) -> np.ndarray:
    """Copy of ``lam`` with entry ``t`` (0-based) replaced by ``value``."""
    out = np.array(lam, dtype=float)
    out[t] = value
    return out


def active_at(spec: SubProcessSpec, lam_star, s: int, t: int, beta: float) -> bool:
    """Does the pull-on-ties optimal policy pull in state s at period t (0-based)
    once period t's price is set to ``beta``?"""
    policy = dp.greedy_policy(spec, substitute(lam_star, t, beta))
    return bool(policy[s, 1, t] == 1.0)


def compute_index(spec: SubProcessSpec, lam_star, s: int, t: int,
                  tol: float = DEFAULT_TOL, bound: float | None = None) -> float:
    """Bisection for the index of state s at period t (0-based) on [-U, U].

    Returns ``U`` if pulling is optimal even at price U, and ``-U`` if it is
    not optimal even at price -U.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    U = spec.index_bound() if bound is None else bound
    if active_at(spec, lam_star, s, t, U):
        return U
    if not active_at(spec, lam_star, s, t, -U):
        return -U
    lo, hi = -U, U
    for _ in range(MAX_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if active_at(spec, lam_star, s, t, mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class IndexTable:
    beta: np.ndarray          # (S, T)
    lambda_star: np.ndarray   # (T,)
    bound: float
    tol: float

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.lambda_star = np.asarray(self.lambda_star, dtype=float)

    @property
    def num_states(self) -> int:
        return self.beta.shape[0]

    @property
    def horizon(self) -> int:
        return self.beta.shape[1]

    def to_csv(self, header_comments=()) -> str:
        """``state,t,beta`` rows with 1-based t; comment lines start with '#'."""
        buf = io.StringIO()
        for line in header_comments:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", "t", "beta"])
        for s in range(self.num_states):
            for t in range(self.horizon):
                writer.writerow([s, t + 1, format(self.beta[s, t], ".17g")])
        return buf.getvalue()

    @staticmethod
    def beta_from_csv(text: str, num_states: int, horizon: int) -> np.ndarray:
        lines = [l for l in text.splitlines() if l and not l.startswith("#")]
        beta = np.full((num_states, horizon), np.nan)
        for row in csv.DictReader(lines):
            beta[int(row["state"]), int(row["t"]) - 1] = float(row["beta"])
        if np.isnan(beta).any():
            raise ValueError("index CSV does not cover every (state, t)")
        return beta


def index_table(spec: SubProcessSpec, lam_star, tol: float = DEFAULT_TOL) -> IndexTable:
    U = spec.index_bound()
    beta = np.empty((spec.num_states, spec.horizon))
    for s in range(spec.num_states):
        for t in range(spec.horizon):
            beta[s, t] = compute_index(spec, lam_star, s, t, tol, U)
    return IndexTable(beta, np.asarray(lam_star, dtype=float), U, tol)
