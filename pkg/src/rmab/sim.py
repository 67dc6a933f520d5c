"""Monte-Carlo evaluation of the index policy and the baselines, plus exact oracles.

The index policy is simulated on arm counts: arms are exchangeable, so the
successors of the ``c`` arms taking action ``a`` in state ``s`` are one
multinomial draw from the kernel row. Baselines that track per-arm statistics
(UCB, OCBA-m) are simulated arm by arm.

Replication ``i`` always draws from its own stream derived from
``(seed, policy tag, K, i)``, so results do not depend on how replications are
split across worker processes.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import dp
from .model import BudgetProfile, SubProcessSpec
from .policy import select_activations

Z95 = 1.96
MAX_COUNT_STATES = 10**6

_TAGS = {"index": 1, "ucb": 2, "ucb_train": 3, "ocba_m": 4}

DEFAULT_UCB_GRID = tuple(0.25 * i for i in range(21))


@dataclass
class SimResult:
    policy: str
    num_arms: int
    budgets: np.ndarray
    reps: int
    totals: np.ndarray = field(repr=False)
    seed: int

    @property
    def mean_per_arm(self) -> float:
        return float(self.totals.mean() / self.num_arms)

    @property
    def ci_half(self) -> float:
        """95% normal-approximation half-width for the per-arm mean."""
        if self.reps < 2:
            return 0.0
        return float(Z95 * self.totals.std(ddof=1) / math.sqrt(self.reps) / self.num_arms)

    def ci(self) -> tuple[float, float]:
        return self.mean_per_arm - self.ci_half, self.mean_per_arm + self.ci_half


def default_workers() -> int:
    return max(1, int(os.environ.get("RMAB_THREADS", os.cpu_count() or 1)))


def replication_rng(seed: int, tag: str, num_arms: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_TAGS[tag], num_arms, rep)))


def _run_chunk(args):
    kernel, payload, seed, tag, num_arms, reps = args
    return [kernel(payload, replication_rng(seed, tag, num_arms, i)) for i in reps]


def _run_replications(kernel, payload, reps, seed, tag, num_arms, workers=None):
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, reps))
    if workers == 1:
        return _run_chunk((kernel, payload, seed, tag, num_arms, range(reps)))
    bounds = np.linspace(0, reps, workers + 1).astype(int)
    jobs = [(kernel, payload, seed, tag, num_arms, range(bounds[i], bounds[i + 1]))
            for i in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        return [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]


# --- index policy -------------------------------------------------------------

def _index_replication(payload, rng):
    spec, budgets, beta, rho_active, num_arms, track = payload
    S, T = spec.num_states, spec.horizon
    P = spec.kernels
    outcome = spec.outcome_reward
    counts = np.zeros(S, dtype=int)
    counts[spec.initial_state] = num_arms
    total = 0.0
    N = np.zeros((T, S), dtype=int) if track else None
    M = np.zeros((T, S), dtype=int) if track else None
    for t in range(T):
        plan = select_activations(counts, beta[:, t], rho_active[:, t], int(budgets[t]))
        assert plan.sum() == budgets[t]
        if track:
            N[t], M[t] = counts, plan
        nxt = np.zeros(S, dtype=int)
        for s in np.flatnonzero(counts):
            for a, c in ((1, plan[s]), (0, counts[s] - plan[s])):
                if c == 0:
                    continue
                succ = rng.multinomial(c, P[a, s])
                nxt += succ
                if outcome is None:
                    total += c * spec.reward[t, s, a]
                else:
                    total += succ @ outcome[t, s, a]
        counts = nxt
    return (total, N, M) if track else total


def _check_artifacts(spec, budget, beta, rho):
    if budget.horizon != spec.horizon:
        raise ValueError("budget horizon does not match the arm model")
    if beta.shape != (spec.num_states, spec.horizon):
        raise ValueError("index table does not match the arm model")
    if rho.shape != (spec.num_states, 2, spec.horizon):
        raise ValueError("occupation measure does not match the arm model")


def simulate_index_policy(spec: SubProcessSpec, budget: BudgetProfile, indices, rho,
                          reps: int, seed: int, workers=None) -> SimResult:
    """Total reward of the index policy over ``reps`` independent runs.

    ``indices`` is an :class:`~rmab.index.IndexTable` (or a bare (S, T) array)
    and ``rho`` the occupation measure used for tie-breaking.
    """
    beta = np.asarray(getattr(indices, "beta", indices), dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_artifacts(spec, budget, beta, rho)
    payload = (spec, budget.budgets, beta, rho[:, 1, :], budget.num_arms, False)
    totals = _run_replications(_index_replication, payload, reps, seed, "index",
                               budget.num_arms, workers)
    return SimResult("index", budget.num_arms, budget.budgets, reps, np.array(totals), seed)


def simulate_index_trajectories(spec, budget, indices, rho, reps, seed, workers=None):
    """Per-replication totals, state counts N[t, s] and pull counts M[t, s]."""
    beta = np.asarray(getattr(indices, "beta", indices), dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_artifacts(spec, budget, beta, rho)
    payload = (spec, budget.budgets, beta, rho[:, 1, :], budget.num_arms, True)
    out = _run_replications(_index_replication, payload, reps, seed, "index",
                            budget.num_arms, workers)
    totals = np.array([o[0] for o in out])
    return totals, np.stack([o[1] for o in out]), np.stack([o[2] for o in out])


def occupancy_convergence_report(spec: SubProcessSpec, rule, K_list, indices, rho, policy_star,
                                 reps: int, seed: int, workers=None) -> list[dict]:
    """Distance of the simulated state/pull fractions from the single-arm marginals.

    For each K, averages over replications the largest deviation over (s, t)
    of ``N_t(s)/K`` from ``P_t(s)`` and of ``M_t(s)/K`` from
    ``P_t(s) * pi(s, 1, t)``, where ``P`` are the state marginals of
    ``policy_star``. ``rule`` maps K to the budget.
    """
    marg = dp.state_marginals(spec, policy_star)          # (S, T)
    target_n = marg.T                                       # (T, S)
    target_m = (marg * policy_star[:, 1, :]).T
    rows = []
    for K in K_list:
        budget = rule(K)
        _, N, M = simulate_index_trajectories(spec, budget, indices, rho, reps, seed, workers)
        dev_n = np.abs(N / K - target_n).max(axis=(1, 2))
        dev_m = np.abs(M / K - target_m).max(axis=(1, 2))
        rows.append({
            "K": K, "reps": reps,
            "state_deviation": float(dev_n.mean()),
            "state_deviation_ci": float(Z95 * dev_n.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            "pull_deviation": float(dev_m.mean()),
            "pull_deviation_ci": float(Z95 * dev_m.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        })
    return rows


# --- UCB ----------------------------------------------------------------------

def _top(score, m):
    """Indices of the m largest scores, ties to the lower arm index."""
    order = np.lexsort((np.arange(len(score)), -score))
    return order[:m]


def ucb_scores(successes, pulls, width: float) -> np.ndarray:
    """Sample mean plus ``width`` sample standard deviations; unpulled arms score +inf."""
    successes = np.asarray(successes, dtype=float)
    pulls = np.asarray(pulls, dtype=float)
    pulled = pulls > 0
    mean = np.divide(successes, pulls, out=np.zeros_like(successes), where=pulled)
    # population std of 0/1 data
    std = np.sqrt(np.clip(mean * (1.0 - mean), 0.0, None))
    return np.where(pulled, mean + width * std, np.inf)


def _posterior_top(successes, pulls, prior, m):
    a0, b0 = prior
    post = (a0 + successes) / (a0 + b0 + pulls)
    chosen = _top(post, m)
    return post[chosen].sum()


def _ucb_replication(payload, rng):
    num_arms, budgets, width, prior, select_last = payload
    theta = rng.beta(prior[0], prior[1], size=num_arms)
    succ = np.zeros(num_arms)
    pulls = np.zeros(num_arms)
    total = 0.0
    measure = budgets[:-1] if select_last else budgets
    for m in measure:
        chosen = _top(ucb_scores(succ, pulls, width), int(m))
        outcome = rng.random(len(chosen)) < theta[chosen]
        succ[chosen] += outcome
        pulls[chosen] += 1
        if not select_last:
            total += outcome.sum()
    if select_last:
        total = _posterior_top(succ, pulls, prior, int(budgets[-1]))
    return total


def simulate_ucb(budget: BudgetProfile, width: float, reps: int, seed: int,
                 prior=(1, 1), select_last: bool = False, workers=None,
                 _tag: str = "ucb") -> SimResult:
    """UCB on Bernoulli arms with Beta-distributed success probabilities.

    Each period pulls the ``m_t`` arms with the largest UCB score. With
    ``select_last`` the final budget entry is a selection step instead: the
    arms with the highest posterior means are chosen and the reward is the sum
    of those means (subset selection); otherwise the reward is the number of
    successes.
    """
    if width < 0:
        raise ValueError("width must be nonnegative")
    payload = (budget.num_arms, budget.budgets, float(width), tuple(prior), select_last)
    totals = _run_replications(_ucb_replication, payload, reps, seed, _tag, budget.num_arms, workers)
    return SimResult("ucb", budget.num_arms, budget.budgets, reps, np.array(totals), seed)


def pretrain_ucb_width(budget: BudgetProfile, grid=DEFAULT_UCB_GRID, reps: int = 1000,
                       seed: int = 0, prior=(1, 1), select_last: bool = False,
                       workers=None) -> float:
    """Width with the best mean reward on training runs drawn from separate streams."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    means = [simulate_ucb(budget, w, reps, seed, prior, select_last, workers,
                          _tag="ucb_train").mean_per_arm for w in grid]
    return float(grid[int(np.argmax(means))])


# --- OCBA-m -------------------------------------------------------------------

def ocba_m_desired(successes, samples, num_select: int, extra: int) -> np.ndarray:
    """Additional samples each design should get if ``extra`` more were spent.

    Allocation follows OCBA-m: ``N_i`` proportional to ``(sigma_i / (mu_i - c))^2``
    with ``c`` between the m-th and (m+1)-th best means, weighted by their
    standard deviations. Bernoulli variances ``mu (1 - mu)`` stand in for the
    normal-theory variances.
    """
    successes = np.asarray(successes, dtype=float)
    samples = np.asarray(samples, dtype=float)
    mu = successes / samples
    sigma = np.sqrt(np.clip(mu * (1.0 - mu), 0.0, None))
    order = _top(mu, len(mu))
    k = len(mu)
    if num_select >= k:
        c = mu.min() - 1.0
    else:
        i, j = order[num_select - 1], order[num_select]
        w = sigma[i] + sigma[j]
        c = (sigma[j] * mu[i] + sigma[i] * mu[j]) / w if w > 0 else 0.5 * (mu[i] + mu[j])
    gap = np.abs(mu - c)
    gap = np.maximum(gap, 1e-12)
    ratio = (np.maximum(sigma, 1e-12) / gap) ** 2
    target = (samples.sum() + extra) * ratio / ratio.sum()
    return target - samples


def _ocba_replication(payload, rng):
    num_arms, budgets, prior = payload
    theta = rng.beta(prior[0], prior[1], size=num_arms)
    # warm start: the prior's pseudo-observations count as samples
    succ = np.full(num_arms, float(prior[0]))
    samples = np.full(num_arms, float(prior[0] + prior[1]))
    select = int(budgets[-1])
    for m in budgets[:-1]:
        chosen = _top(ocba_m_desired(succ, samples, select, int(m)), int(m))
        succ[chosen] += rng.random(len(chosen)) < theta[chosen]
        samples[chosen] += 1
    chosen = _top(succ / samples, select)
    return float((succ[chosen] / samples[chosen]).sum())


def simulate_ocba_m(budget: BudgetProfile, reps: int, seed: int, prior=(1, 1),
                    workers=None) -> SimResult:
    """OCBA-m adapted to one sample per design per period.

    ``budget`` has the measurement counts for periods 1..T followed by the
    number of designs selected. Each period measures the designs with the
    largest desired additional allocation; the final selection takes the
    highest posterior means and earns their sum.
    """
    payload = (budget.num_arms, budget.budgets, tuple(prior))
    totals = _run_replications(_ocba_replication, payload, reps, seed, "ocba_m",
                               budget.num_arms, workers)
    return SimResult("ocba_m", budget.num_arms, budget.budgets, reps, np.array(totals), seed)


# --- exact oracles on small instances ------------------------------------------

def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def count_state_space_size(num_arms: int, num_states: int) -> int:
    return math.comb(num_arms + num_states - 1, num_states - 1)


def _multinomial_pmf(c, probs):
    out = {}
    for comp in _compositions(c, len(probs)):
        p = math.factorial(c)
        for k, q in zip(comp, probs):
            p = p / math.factorial(k) * q ** k
        if p > 0:
            out[comp] = out.get(comp, 0.0) + p
    return out


def _convolve(d1, d2):
    out = {}
    for k1, p1 in d1.items():
        for k2, p2 in d2.items():
            k = tuple(a + b for a, b in zip(k1, k2))
            out[k] = out.get(k, 0.0) + p1 * p2
    return out


def count_transition(spec: SubProcessSpec, counts, plan) -> dict:
    """Exact distribution of next-period counts given counts and pulls per state."""
    P = spec.kernels
    S = spec.num_states
    dist = {(0,) * S: 1.0}
    for s in range(S):
        for a, c in ((1, plan[s]), (0, counts[s] - plan[s])):
            if c:
                dist = _convolve(dist, _multinomial_pmf(int(c), P[a, s]))
    return dist


def _plans(counts, m):
    """All ways to pull exactly m arms given per-state counts."""
    ranges = [range(c + 1) for c in counts]
    for plan in itertools.product(*ranges):
        if sum(plan) == m:
            yield plan


def _guard(spec, num_arms):
    size = count_state_space_size(num_arms, spec.num_states)
    if size > MAX_COUNT_STATES:
        raise ValueError(f"count state space has {size} states, limit is {MAX_COUNT_STATES}")


def brute_force_constrained_optimum(spec: SubProcessSpec, num_arms: int, budgets) -> float:
    """Optimal value of the K-arm problem with exactly ``budgets[t]`` pulls each period.

    Backward induction over per-state counts with every feasible pull plan.
    """
    _guard(spec, num_arms)
    budgets = [int(m) for m in budgets]
    if len(budgets) != spec.horizon:
        raise ValueError("budgets must have one entry per period")
    r = spec.reward
    T = spec.horizon

    @lru_cache(maxsize=None)
    def value(t, counts):
        if t == T:
            return 0.0
        best = -math.inf
        for plan in _plans(counts, budgets[t]):
            now = sum(p * r[t, s, 1] + (c - p) * r[t, s, 0]
                      for s, (c, p) in enumerate(zip(counts, plan)))
            if t + 1 < T:
                now += sum(q * value(t + 1, nxt)
                           for nxt, q in count_transition(spec, counts, plan).items())
            best = max(best, now)
        return best

    start = [0] * spec.num_states
    start[spec.initial_state] = num_arms
    return float(value(0, tuple(start)))


def brute_force_lagrangian(spec: SubProcessSpec, lam, budget: BudgetProfile) -> float:
    """Unconstrained joint optimum of rewards minus ``lam_t (|A_t| - m_t)``.

    Backward induction over the full product state space (every arm's state)
    and all 2^K joint actions; independent of the per-arm decomposition.
    """
    lam = np.asarray(lam, dtype=float)
    K, S, T = budget.num_arms, spec.num_states, spec.horizon
    if S ** K > MAX_COUNT_STATES:
        raise ValueError("product state space too large")
    P = spec.kernels
    r = spec.reward
    joint_states = list(itertools.product(range(S), repeat=K))
    actions = list(itertools.product((0, 1), repeat=K))
    v_next = {x: 0.0 for x in joint_states}
    for t in range(T - 1, -1, -1):
        v = {}
        for x in joint_states:
            best = -math.inf
            for a in actions:
                val = sum(r[t, x[i], a[i]] for i in range(K)) - lam[t] * (sum(a) - budget.budgets[t])
                if t + 1 < T:
                    for y in joint_states:
                        p = 1.0
                        for i in range(K):
                            p *= P[a[i], x[i], y[i]]
                        val += p * v_next[y]
                best = max(best, val)
            v[x] = best
        v_next = v
    return float(v_next[(spec.initial_state,) * K])


def evaluate_index_policy_exact(spec: SubProcessSpec, budget: BudgetProfile, indices, rho) -> float:
    """Expected total reward of the index policy, by propagating the count distribution."""
    _guard(spec, budget.num_arms)
    beta = np.asarray(getattr(indices, "beta", indices), dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_artifacts(spec, budget, beta, rho)
    start = [0] * spec.num_states
    start[spec.initial_state] = budget.num_arms
    dist = {tuple(start): 1.0}
    total = 0.0
    r = spec.reward
    for t in range(spec.horizon):
        nxt = {}
        for counts, p in dist.items():
            c = np.array(counts)
            plan = select_activations(c, beta[:, t], rho[:, 1, t], int(budget.budgets[t]))
            total += p * float(plan @ r[t, :, 1] + (c - plan) @ r[t, :, 0])
            if t + 1 < spec.horizon:
                for k, q in count_transition(spec, counts, plan).items():
                    nxt[k] = nxt.get(k, 0.0) + p * q
        dist = nxt
    return total
