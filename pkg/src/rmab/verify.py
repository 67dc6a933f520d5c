"""Self-checks run by ``rmab verify``: small oracles that pin the pipeline down.

Each check returns a list of :class:`Check` results; a failed check carries a
diagnostic naming the instance and the first offending quantity.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dp, index, lp, policy, relax, sim
from .model import BudgetProfile, build_bernoulli_mab, random_spec


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name} ({self.seconds:.1f}s): {self.detail}"


def _timed(name, fn, *args, **kwargs) -> Check:
    t0 = time.perf_counter()
    try:
        passed, detail = fn(*args, **kwargs)
    except Exception as exc:  # a crash is a failure with a diagnostic, not an abort
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return Check(name, passed, detail, time.perf_counter() - t0)


def decomposition_check(instances=100, lambdas=5, seed=0, tol=1e-9):
    """Joint Lagrangian optimum over all arms equals ``K Q(lam) + m . lam`` (K=2)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        S, T = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        spec = random_spec(rng, S, T)
        budget = BudgetProfile(2, rng.integers(0, 3, size=T))
        for _ in range(lambdas):
            lam = rng.uniform(-1.0, 2.0, size=T)
            joint = sim.brute_force_lagrangian(spec, lam, budget)
            split = relax.lagrangian_value(spec, lam, budget)
            err = abs(joint - split)
            worst = max(worst, err)
            if err > tol:
                return False, (f"instance {i} (S={S}, T={T}, m={budget.budgets.tolist()}), "
                               f"lam={lam.tolist()}: joint {joint!r} vs per-arm {split!r}")
    return True, f"{instances} instances x {lambdas} multipliers, worst error {worst:.2e}"


def upper_bound_check(instances=50, lambdas=20, seed=1, tol=1e-9):
    """P(lam) dominates the exact K=3, m=1, T=3 optimum, including at lam*."""
    rng = np.random.default_rng(seed)
    slack = np.inf
    for i in range(instances):
        S = int(rng.integers(2, 4))
        spec = random_spec(rng, S, 3)
        budget = BudgetProfile.constant(3, 1, 3)
        opt = sim.brute_force_constrained_optimum(spec, 3, budget.budgets)
        lams = [rng.uniform(-1.0, 2.0, size=3) for _ in range(lambdas)]
        lams.append(relax.minimize_bound_lp(spec, budget).lambda_star)
        for lam in lams:
            gap = relax.lagrangian_value(spec, lam, budget) - opt
            slack = min(slack, gap)
            if gap < -tol:
                return False, f"instance {i}: P({lam.tolist()}) is {-gap:.3e} below the optimum"
    return True, f"{instances} instances, smallest slack {slack:.3e}"


def rounding_check(cases=1000, seed=2):
    """Rounding hits the total, respects caps and stays within one unit of the target."""
    rng = np.random.default_rng(seed)
    for i in range(cases):
        n = int(rng.integers(1, 8))
        total = int(rng.integers(0, 50))
        frac = rng.dirichlet(np.ones(n))
        avail = np.ceil(total * frac).astype(int) + rng.integers(0, 3, size=n)
        b = policy.rounding(total, frac, avail)
        if b.sum() != total or np.any(b > avail) or np.any(np.abs(b - total * frac) >= 1):
            return False, f"case {i}: total={total} frac={frac.tolist()} avail={avail.tolist()} -> {b.tolist()}"
    return True, f"{cases} random cases"


def occupation_check(horizon=6, fraction=1 / 3, tol_obj=1e-6, tol_act=1e-8):
    """LP optimum vs Q(lam*), exact activation rate of the extracted policy, index/policy consistency."""
    spec = build_bernoulli_mab(horizon)
    alpha = np.full(horizon, fraction)
    lam = lp.multipliers_from_lp(spec, alpha)
    occ = lp.solve_occupation_lp(spec, alpha, lam)
    q = dp.q_value(spec, lam)
    if abs(occ.objective - q) > tol_obj:
        return False, f"LP objective {occ.objective!r} vs Q(lam*) {q!r}"
    beta = index.index_table(spec, lam).beta
    pi = lp.extract_policy(occ.rho, beta, lam)
    act = dp.activation_profile(spec, pi)
    bad = np.flatnonzero(np.abs(act - alpha) > tol_act)
    if bad.size:
        return False, f"activation rate {act[bad[0]]!r} at t={bad[0] + 1}, expected {fraction!r}"
    problems = index_policy_consistency(beta, lam, pi)
    if problems:
        return False, problems[0]
    return True, f"objective error {abs(occ.objective - q):.2e}, max activation error {np.abs(act - alpha).max():.2e}"


def index_policy_consistency(beta, lam_star, pi, tol=index.DEFAULT_TOL, tol_pi=1e-8) -> list[str]:
    """States priced above lam*_t are always pulled; states priced below never are."""
    out = []
    S, T = beta.shape
    for t in range(T):
        for s in range(S):
            if beta[s, t] > lam_star[t] + tol and pi[s, 1, t] < 1 - tol_pi:
                out.append(f"state {s}, t={t + 1}: index above lam* but pull prob {pi[s, 1, t]!r}")
            if beta[s, t] < lam_star[t] - tol and pi[s, 1, t] > tol_pi:
                out.append(f"state {s}, t={t + 1}: index below lam* but pull prob {pi[s, 1, t]!r}")
    return out


def lookahead_advantage(spec, lam_star) -> np.ndarray:
    """Closed-form index: one-period advantage of pulling, continuation valued at lam*.

    Changing period t's price only moves period t's decision, so the index is
    ``r(s,1) - r(s,0) + (P1 - P0) V_{t+1}`` evaluated at lam* (clipped to [-U, U]).
    """
    q = dp.lookahead_table(spec, np.zeros(spec.horizon), dp.backward_induction(spec, lam_star))
    adv = (q[:, :, 1] - q[:, :, 0]).T
    U = spec.index_bound()
    return np.clip(adv, -U, U)


def grid_scan(spec, lam_star, points):
    """Pull decisions on a uniform price grid over [-U, U] for every (state, period).

    Returns the grid and a boolean array ``active[k, s, t]``: whether the
    pull-on-ties optimal policy pulls in s at t when t's price is ``grid[k]``.
    """
    U = spec.index_bound()
    grid = np.linspace(-U, U, points)
    active = np.zeros((points, spec.num_states, spec.horizon), dtype=bool)
    for t in range(spec.horizon):
        for k, g in enumerate(grid):
            active[k, :, t] = dp.greedy_policy(spec, index.substitute(lam_star, t, g))[:, 1, t] == 1.0
    return grid, active


def index_grid_check(horizon=6, fraction=1 / 3, points=10_000, tol=1e-4):
    """Bisection indices agree with a grid scan and with the closed form.

    The grid is coarser than ``tol``, so the check is that each index lies
    within ``tol`` of the grid cell where the decision switches.
    """
    spec = build_bernoulli_mab(horizon)
    lam = lp.multipliers_from_lp(spec, np.full(horizon, fraction))
    table = index.index_table(spec, lam)
    U = spec.index_bound()
    grid, active = grid_scan(spec, lam, points)
    for s in range(spec.num_states):
        for t in range(spec.horizon):
            b = table.beta[s, t]
            on = np.flatnonzero(active[:, s, t])
            if on.size and not np.all(np.diff(on) == 1):
                return False, f"state {s}, t={t + 1}: pulling is not monotone in the price"
            if on.size == 0:
                lo = hi = -U
            else:
                lo = grid[on[-1]]
                hi = grid[min(on[-1] + 1, points - 1)]
            if not (lo - tol <= b <= hi + tol):
                return False, f"state {s}, t={t + 1}: index {b!r} outside grid bracket [{lo!r}, {hi!r}]"
    closed = lookahead_advantage(spec, lam)
    diff = np.abs(closed - table.beta)
    if diff.max() > tol:
        s, t = np.unravel_index(np.argmax(diff), diff.shape)
        return False, f"state {s}, t={t + 1}: index {table.beta[s, t]!r} vs closed form {closed[s, t]!r}"
    last = spec.reward[-1, :, 1] - spec.reward[-1, :, 0]
    err = np.abs(table.beta[:, -1] - np.clip(last, -U, U)).max()
    if err > tol:
        return False, f"final-period index differs from the one-step reward advantage by {err:.2e}"
    return True, f"grid of {points} points, closed-form error {diff.max():.2e}"


def sandwich_check(instances=10, seed=3, tol=1e-9):
    """Index policy value <= exact K=3 optimum <= P(lam*)."""
    rng = np.random.default_rng(seed)
    for i in range(instances):
        spec = random_spec(rng, int(rng.integers(2, 4)), 3)
        budget = BudgetProfile.constant(3, 1, 3)
        report = relax.minimize_bound_lp(spec, budget)
        occ = lp.solve_occupation_lp(spec, budget.alpha)
        table = index.index_table(spec, report.lambda_star)
        val = sim.evaluate_index_policy_exact(spec, budget, table, occ.rho)
        opt = sim.brute_force_constrained_optimum(spec, 3, budget.budgets)
        if not (val <= opt + tol and opt <= report.bound_value + tol):
            return False, f"instance {i}: index {val!r}, optimum {opt!r}, bound {report.bound_value!r}"
    return True, f"{instances} instances"


def run(level: str = "quick") -> list[Check]:
    if level not in ("quick", "full"):
        raise ValueError(f"unknown level {level!r}")
    quick = level == "quick"
    checks = [
        _timed("per-arm decomposition", decomposition_check, 20 if quick else 100),
        _timed("upper bound", upper_bound_check, 5 if quick else 50, 5 if quick else 20),
        _timed("rounding", rounding_check),
        _timed("occupation LP", occupation_check),
        _timed("index grid", index_grid_check, 6, 1 / 3, 10_000),
    ]
    if not quick:
        checks.append(_timed("brute-force sandwich", sandwich_check))
    return checks
