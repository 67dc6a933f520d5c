import itertools
import math

import numpy as np
import pytest

from rmab import dp, index, lp, model, relax, sim
from rmab.model import BudgetProfile


def solved(spec, budget):
    rep = relax.minimize_bound_lp(spec, budget)
    occ = lp.solve_occupation_lp(spec, budget.alpha)
    return rep, occ, index.index_table(spec, rep.lambda_star)


def test_result_statistics():
    res = sim.SimResult("index", 4, np.array([1]), 4, np.array([1.0, 2.0, 3.0, 6.0]), 0)
    assert res.mean_per_arm == pytest.approx(3.0 / 4)
    assert res.ci_half == pytest.approx(1.96 * np.std([1, 2, 3, 6], ddof=1) / 2 / 4)
    lo, hi = res.ci()
    assert lo < res.mean_per_arm < hi


def test_deterministic_spec_has_zero_variance():
    reward = np.zeros((3, 2, 2))
    reward[:, 0, 1], reward[:, 1, 1], reward[:, 1, 0] = 1.0, 0.5, 0.25
    spec = model.SubProcessSpec(2, 3, 0, reward, np.array([[0, 1.0], [0, 1]]), np.eye(2))
    budget = BudgetProfile.constant(4, 2, 3)
    _, occ, table = solved(spec, budget)
    res = sim.simulate_index_policy(spec, budget, table, occ.rho, 50, 3)
    exact = sim.evaluate_index_policy_exact(spec, budget, table, occ.rho)
    assert res.totals.std() == 0.0
    assert res.totals[0] == pytest.approx(exact)


def test_simulation_matches_exact_count_chain(rng):
    spec = model.random_spec(rng, 3, 2)
    budget = BudgetProfile.constant(3, 1, 2)
    _, occ, table = solved(spec, budget)
    exact = sim.evaluate_index_policy_exact(spec, budget, table, occ.rho)
    res = sim.simulate_index_policy(spec, budget, table, occ.rho, 4000, 11)
    assert abs(res.totals.mean() - exact) < 3 * res.ci_half * budget.num_arms


def test_bernoulli_realised_rewards_are_unbiased(mab):
    # realised 0/1 rewards and expected rewards estimate the same mean
    spec, budget = mab["spec"], mab["rule"](6)
    exact = sim.evaluate_index_policy_exact(spec, budget, mab["table"], mab["occ"].rho)
    res = sim.simulate_index_policy(spec, budget, mab["table"], mab["occ"].rho, 4000, 5)
    assert abs(res.totals.mean() - exact) < 3 * res.ci_half * budget.num_arms


def test_seed_determinism_and_worker_invariance(mab):
    args = (mab["spec"], mab["rule"](12), mab["table"], mab["occ"].rho, 40, 9)
    a = sim.simulate_index_policy(*args, workers=1)
    b = sim.simulate_index_policy(*args, workers=1)
    c = sim.simulate_index_policy(*args, workers=2)
    np.testing.assert_array_equal(a.totals, b.totals)
    np.testing.assert_array_equal(a.totals, c.totals)
    d = sim.simulate_index_policy(*args[:-1], 10, workers=1)
    assert not np.array_equal(a.totals, d.totals)


def test_budget_exact_and_first_period(mab):
    K = 12
    budget = mab["rule"](K)
    totals, N, M = sim.simulate_index_trajectories(mab["spec"], budget, mab["table"], mab["occ"].rho, 30, 2)
    assert (M.sum(axis=2) == budget.budgets).all()
    assert (N.sum(axis=2) == K).all()
    assert (M <= N).all()
    s1 = mab["spec"].initial_state
    assert (N[:, 0, s1] == K).all()
    assert (M[:, 0, s1] == 4).all()


def test_occupancy_report_first_period_and_shrinkage(mab):
    rows = sim.occupancy_convergence_report(mab["spec"], mab["rule"], (12, 120), mab["table"],
                                            mab["occ"].rho, mab["policy"], 100, 4)
    assert [r["K"] for r in rows] == [12, 120]
    assert rows[1]["state_deviation"] < rows[0]["state_deviation"]
    assert rows[1]["pull_deviation"] < rows[0]["pull_deviation"]


def test_artifact_shape_checks(mab):
    with pytest.raises(ValueError):
        sim.simulate_index_policy(mab["spec"], BudgetProfile.constant(12, 4, 5), mab["table"],
                                  mab["occ"].rho, 1, 0)
    with pytest.raises(ValueError):
        sim.simulate_index_policy(mab["spec"], mab["rule"](12), mab["table"].beta[:, :3],
                                  mab["occ"].rho, 1, 0)


# --- UCB ------------------------------------------------------------------------

def test_ucb_scores():
    s = sim.ucb_scores([1, 0, 3], [2, 0, 3], 1.0)
    assert s[0] == pytest.approx(1.0)
    assert s[1] == np.inf
    assert s[2] == pytest.approx(1.0)
    # one pull: zero spread
    assert sim.ucb_scores([1], [1], 3.0)[0] == 1.0


def test_ucb_ties_break_by_arm_index():
    score = sim.ucb_scores([1, 1, 1, 1], [1, 1, 1, 1], 0.0)
    assert sim._top(score, 2).tolist() == [0, 1]
    score = sim.ucb_scores([0, 1, 0], [0, 1, 0], 0.0)
    assert sim._top(score, 2).tolist() == [0, 2]


def test_ucb_pulling_everything_earns_prior_mean():
    budget = BudgetProfile.constant(5, 5, 4)
    res = sim.simulate_ucb(budget, 1.0, 3000, 1)
    assert abs(res.mean_per_arm - 4 * 0.5) < 3 * res.ci_half


def test_ucb_rejects_negative_width():
    with pytest.raises(ValueError):
        sim.simulate_ucb(BudgetProfile.constant(2, 1, 1), -1.0, 1, 0)


def test_ucb_determinism():
    budget = BudgetProfile.constant(12, 4, 6)
    a = sim.simulate_ucb(budget, 0.5, 50, 3)
    b = sim.simulate_ucb(budget, 0.5, 50, 3)
    np.testing.assert_array_equal(a.totals, b.totals)


def test_pretrain_width():
    budget = BudgetProfile.constant(12, 4, 6)
    assert sim.pretrain_ucb_width(budget, [1.75], reps=5) == 1.75
    grid = [0.0, 0.5, 3.0]
    means = [sim.simulate_ucb(budget, w, 200, 8, _tag="ucb_train").mean_per_arm for w in grid]
    assert sim.pretrain_ucb_width(budget, grid, reps=200, seed=8) == grid[int(np.argmax(means))]
    with pytest.raises(ValueError):
        sim.pretrain_ucb_width(budget, [], reps=5)


def test_pretraining_uses_separate_streams():
    budget = BudgetProfile.constant(12, 4, 6)
    train = sim.simulate_ucb(budget, 1.0, 20, 3, _tag="ucb_train")
    test = sim.simulate_ucb(budget, 1.0, 20, 3)
    assert not np.array_equal(train.totals, test.totals)


# --- OCBA-m ---------------------------------------------------------------------

def test_ocba_desired_spends_the_extra_samples():
    d = sim.ocba_m_desired([3, 5, 2, 4], [6, 8, 5, 7], 2, 3)
    assert d.sum() == pytest.approx(3.0)


def test_ocba_favours_designs_near_the_boundary():
    # means 0.9, 0.52, 0.48, 0.1 with m = 2: the middle two are hardest to separate
    d = sim.ocba_m_desired([90, 52, 48, 10], [100, 100, 100, 100], 2, 10)
    assert set(sim._top(d, 2).tolist()) == {1, 2}


def test_ocba_identical_observations_select_lowest_index():
    succ = np.array([2.0, 2.0])
    samples = np.array([3.0, 3.0])
    assert sim._top(sim.ocba_m_desired(succ, samples, 1, 1), 1).tolist() == [0]
    assert sim._top(succ / samples, 1).tolist() == [0]


def test_ocba_determinism_and_range():
    budget = model.BudgetRule((0.5, 0.5, 0.3))(10)
    a = sim.simulate_ocba_m(budget, 30, 4)
    b = sim.simulate_ocba_m(budget, 30, 4)
    np.testing.assert_array_equal(a.totals, b.totals)
    assert ((a.totals >= 0) & (a.totals <= 3)).all()


# --- exact oracles ----------------------------------------------------------------

def test_count_transition_is_a_distribution(rng):
    spec = model.random_spec(rng, 3, 2)
    dist = sim.count_transition(spec, (2, 1, 1), (1, 0, 1))
    assert sum(dist.values()) == pytest.approx(1.0)
    assert all(sum(k) == 4 for k in dist)


def test_single_arm_brute_force(rng):
    spec = model.random_spec(rng, 3, 3)
    always = np.zeros((3, 2, 3))
    always[:, 1, :] = 1
    never = 1 - always
    assert sim.brute_force_constrained_optimum(spec, 1, [1, 1, 1]) == pytest.approx(dp.evaluate_policy(spec, always))
    assert sim.brute_force_constrained_optimum(spec, 1, [0, 0, 0]) == pytest.approx(dp.evaluate_policy(spec, never))


def _joint_markov_enumeration(spec, K, budgets):
    """Best joint Markov policy over labelled arms, by listing every policy."""
    S, T = spec.num_states, spec.horizon
    P, r = spec.kernels, spec.reward
    joint = list(itertools.product(range(S), repeat=K))
    plans = [a for a in itertools.product((0, 1), repeat=K)]
    per_t = [[a for a in plans if sum(a) == budgets[t]] for t in range(T)]
    keys = [(t, x) for t in range(T) for x in joint]
    best = -math.inf
    for choice in itertools.product(*[per_t[t] for t, _ in keys]):
        pol = dict(zip(keys, choice))
        dist = {(spec.initial_state,) * K: 1.0}
        total = 0.0
        for t in range(T):
            nxt = {}
            for x, p in dist.items():
                a = pol[(t, x)]
                total += p * sum(r[t, x[i], a[i]] for i in range(K))
                for y in joint:
                    q = np.prod([P[a[i], x[i], y[i]] for i in range(K)])
                    if q:
                        nxt[y] = nxt.get(y, 0.0) + p * q
            dist = nxt
        best = max(best, total)
    return best


def test_brute_force_matches_joint_policy_enumeration(rng):
    for _ in range(3):
        spec = model.random_spec(rng, 2, 2)
        assert sim.brute_force_constrained_optimum(spec, 2, [1, 1]) == pytest.approx(
            _joint_markov_enumeration(spec, 2, [1, 1]), abs=1e-12)


def test_sandwich_on_small_instances(rng):
    for _ in range(5):
        spec = model.random_spec(rng, 3, 3)
        budget = BudgetProfile.constant(3, 1, 3)
        rep, occ, table = solved(spec, budget)
        val = sim.evaluate_index_policy_exact(spec, budget, table, occ.rho)
        opt = sim.brute_force_constrained_optimum(spec, 3, budget.budgets)
        assert val <= opt + 1e-9
        assert opt <= rep.bound_value + 1e-9
        for lam in rng.uniform(-1, 2, size=(20, 3)):
            assert opt <= relax.lagrangian_value(spec, lam, budget) + 1e-9


def test_lagrangian_brute_force_decomposes(rng):
    for _ in range(10):
        spec = model.random_spec(rng, 2, 2)
        budget = BudgetProfile(2, [1, 2])
        lam = rng.uniform(-1, 2, size=2)
        assert sim.brute_force_lagrangian(spec, lam, budget) == pytest.approx(
            relax.lagrangian_value(spec, lam, budget), abs=1e-9)


def test_size_guards():
    spec = model.build_bernoulli_mab(6)
    with pytest.raises(ValueError):
        sim.brute_force_constrained_optimum(spec, 1200, [400] * 6)
    with pytest.raises(ValueError):
        sim.brute_force_lagrangian(spec, np.zeros(6), BudgetProfile.constant(12, 4, 6))
    with pytest.raises(ValueError):
        sim.brute_force_constrained_optimum(spec, 2, [1])
