"""Backward induction and forward propagation for one arm.

Shapes (0-based periods): values ``(S, T + 1)`` with a zero last column,
policies ``(S, 2, T)`` holding action probabilities, marginals ``(S, T)``.
"""
from __future__ import annotations

import numpy as np

from .model import SubProcessSpec

TIE_TOL = 1e-9


def _check_lambda(spec: SubProcessSpec, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (spec.horizon,):
        raise ValueError(f"multiplier vector has shape {lam.shape}, expected ({spec.horizon},)")
    if not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    return lam


def _lookahead(spec, lam, v_next, t):
    """One-step lookahead values at period t, shape (S, 2)."""
    K = spec.kernels
    q = spec.reward[t].copy()
    q[:, 1] -= lam[t]
    q[:, 0] += K[0] @ v_next
    q[:, 1] += K[1] @ v_next
    return q


def backward_induction(spec: SubProcessSpec, lam) -> np.ndarray:
    """Optimal values of the arm under pull price ``lam[t]`` per period."""
    lam = _check_lambda(spec, lam)
    S, T = spec.num_states, spec.horizon
    v = np.zeros((S, T + 1))
    for t in range(T - 1, -1, -1):
        v[:, t] = _lookahead(spec, lam, v[:, t + 1], t).max(axis=1)
    return v


def lookahead_table(spec: SubProcessSpec, lam, values=None) -> np.ndarray:
    """All one-step lookahead values, shape (T, S, 2)."""
    lam = _check_lambda(spec, lam)
    if values is None:
        values = backward_induction(spec, lam)
    return np.stack([_lookahead(spec, lam, values[:, t + 1], t) for t in range(spec.horizon)])


def greedy_policy(spec: SubProcessSpec, lam, values=None) -> np.ndarray:
    """Deterministic optimal policy that pulls whenever pulling ties."""
    q = lookahead_table(spec, lam, values)
    pull = q[:, :, 1] >= q[:, :, 0] - TIE_TOL
    policy = np.zeros((spec.num_states, 2, spec.horizon))
    policy[:, 1, :] = pull.T
    policy[:, 0, :] = ~pull.T
    return policy


def q_value(spec: SubProcessSpec, lam) -> float:
    return float(backward_induction(spec, lam)[spec.initial_state, 0])


def _check_policy(spec, policy):
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (spec.num_states, 2, spec.horizon):
        raise ValueError(f"policy has shape {policy.shape}, "
                         f"expected {(spec.num_states, 2, spec.horizon)}")
    return policy


def state_marginals(spec: SubProcessSpec, policy) -> np.ndarray:
    """P(S_t = s) under ``policy`` started from the initial state."""
    policy = _check_policy(spec, policy)
    S, T = spec.num_states, spec.horizon
    K = spec.kernels
    p = np.zeros((S, T))
    p[spec.initial_state, 0] = 1.0
    for t in range(T - 1):
        flow0 = p[:, t] * policy[:, 0, t]
        flow1 = p[:, t] * policy[:, 1, t]
        p[:, t + 1] = flow0 @ K[0] + flow1 @ K[1]
    return p


def activation_profile(spec: SubProcessSpec, policy) -> np.ndarray:
    """Expected pulls E[A_t] per period."""
    policy = _check_policy(spec, policy)
    p = state_marginals(spec, policy)
    return (p * policy[:, 1, :]).sum(axis=0)


def evaluate_policy(spec: SubProcessSpec, policy, lam=None) -> float:
    """Expected total reward of ``policy`` net of pull prices ``lam``."""
    policy = _check_policy(spec, policy)
    lam = np.zeros(spec.horizon) if lam is None else _check_lambda(spec, lam)
    p = state_marginals(spec, policy)
    r = spec.reward.copy()
    r[:, :, 1] -= lam[:, None]
    # r is (T, S, 2); policy is (S, 2, T)
    return float(np.einsum("st,sat,tsa->", p, policy, r))
