"""The Lagrangian bound P(lam) and its minimization.

``P(lam) = K * Q(lam) + sum_t m_t * lam_t`` upper-bounds the value of the
K-arm problem for every lam. It is convex and piecewise linear; we minimize
it either exactly through the occupation LP's duals or by projected
subgradient descent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import dp, lp
from .model import BudgetProfile, SubProcessSpec

DECOMPOSITION_TOL = 1e-9


@dataclass
class BoundReport:
    lambda_star: np.ndarray
    bound_value: float
    q_value: float
    method: str
    iterations: int
    num_arms: int
    budgets: np.ndarray

    def __post_init__(self):
        self.lambda_star = np.asarray(self.lambda_star, dtype=float)
        self.budgets = np.asarray(self.budgets, dtype=int)
        expected = self.num_arms * self.q_value + float(self.budgets @ self.lambda_star)
        if abs(expected - self.bound_value) > DECOMPOSITION_TOL * max(1.0, abs(expected)):
            raise AssertionError(
                f"bound {self.bound_value!r} disagrees with K*Q + m.lam = {expected!r}")

    @property
    def bound_per_arm(self) -> float:
        return self.bound_value / self.num_arms

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda_star"] = self.lambda_star.tolist()
        doc["budgets"] = self.budgets.tolist()
        return doc

    def to_json(self, **extra) -> str:
        doc = self.to_dict()
        doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "BoundReport":
        keys = ("lambda_star", "bound_value", "q_value", "method", "iterations",
                "num_arms", "budgets")
        return cls(**{k: doc[k] for k in keys})


def lagrangian_value(spec: SubProcessSpec, lam, budget: BudgetProfile) -> float:
    lam = np.asarray(lam, dtype=float)
    return budget.num_arms * dp.q_value(spec, lam) + float(budget.budgets @ lam)


def subgradient(spec: SubProcessSpec, lam, budget: BudgetProfile) -> np.ndarray:
    """``m_t - K E[A_t]`` under the pull-on-ties optimal policy."""
    policy = dp.greedy_policy(spec, lam)
    return budget.budgets - budget.num_arms * dp.activation_profile(spec, policy)


def minimize_bound_subgradient(spec: SubProcessSpec, budget: BudgetProfile,
                               steps: int = 2000, step_scale: Optional[float] = None,
                               lam0=None, patience: int = 200,
                               history: Optional[list] = None) -> BoundReport:
    """Projected subgradient descent on P over the box [-U, U]^T, U = T * max r.

    Iteration k of an epoch moves ``c / sqrt(k)`` along the normalised
    subgradient, starting with ``c = step_scale`` (default U / 10). When the
    best bound has improved by less than 1e-9 over ``patience`` iterations,
    the epoch restarts from the best iterate with ``c`` halved. Runs at most
    ``steps`` iterations in total and returns the best iterate seen.
    ``history``, if given, receives the best-so-far bound after each step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    upper = spec.index_bound()
    c = upper / 10.0 if step_scale is None else float(step_scale)
    lam = np.zeros(spec.horizon) if lam0 is None else np.clip(np.asarray(lam0, float), -upper, upper)
    best_lam, best_val = lam.copy(), lagrangian_value(spec, lam, budget)
    anchor_val, anchor_k, epoch_k = best_val, 0, 0
    k = 0
    for k in range(1, steps + 1):
        epoch_k += 1
        g = subgradient(spec, lam, budget)
        norm = np.linalg.norm(g)
        if norm == 0.0:
            break  # zero subgradient: lam is a minimizer
        lam = np.clip(lam - c / math.sqrt(epoch_k) * g / norm, -upper, upper)
        val = lagrangian_value(spec, lam, budget)
        if val < best_val:
            best_lam, best_val = lam.copy(), val
        if history is not None:
            history.append(best_val)
        if anchor_val - best_val >= 1e-9:
            anchor_val, anchor_k = best_val, k
        elif k - anchor_k >= patience:
            c /= 2.0
            if c < 1e-9 * max(upper, 1e-300):
                break
            lam, epoch_k = best_lam.copy(), 0
            anchor_val, anchor_k = best_val, k
    q = dp.q_value(spec, best_lam)
    return BoundReport(best_lam, lagrangian_value(spec, best_lam, budget), q,
                       "subgradient", k, budget.num_arms, budget.budgets)


def minimize_bound_lp(spec: SubProcessSpec, budget: BudgetProfile, alpha=None) -> BoundReport:
    """Exact minimizer from the occupation LP duals.

    ``alpha`` defaults to the budget's own fractions ``m_t / K``; pass the
    limiting fractions to get multipliers that do not depend on K.
    """
    alpha = budget.alpha if alpha is None else np.asarray(alpha, dtype=float)
    occ = lp.solve_occupation_lp(spec, alpha)
    lam = occ.budget_duals
    q = dp.q_value(spec, lam)
    return BoundReport(lam, lagrangian_value(spec, lam, budget), q, "lp_dual",
                       occ.solution.iterations, budget.num_arms, budget.budgets)


def minimize_bound(spec: SubProcessSpec, budget: BudgetProfile, method: str = "lp_dual",
                   alpha=None, **kwargs) -> BoundReport:
    if method == "lp_dual":
        return minimize_bound_lp(spec, budget, alpha)
    if method == "subgradient":
        return minimize_bound_subgradient(spec, budget, **kwargs)
    raise ValueError(f"unknown method {method!r}")
