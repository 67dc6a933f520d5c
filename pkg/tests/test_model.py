import json

import numpy as np
import pytest

from rmab import model
from rmab.model import BudgetProfile, BudgetRule, SubProcessSpec


def test_bernoulli_mab_lattice():
    spec = model.build_bernoulli_mab(6)
    assert spec.num_states == 21
    assert spec.labels[spec.initial_state] == (1, 1)
    assert model.validate(spec) == []
    # every state reachable in five pulls from (1, 1)
    assert all(a + b <= 7 for a, b in spec.labels)


def test_bernoulli_mab_kernel_is_posterior_update():
    spec = model.build_bernoulli_mab(4)
    pos = {st: i for i, st in enumerate(spec.labels)}
    i = pos[(2, 1)]
    assert spec.kernel_active[i, pos[(3, 1)]] == pytest.approx(2 / 3)
    assert spec.kernel_active[i, pos[(2, 2)]] == pytest.approx(1 / 3)
    np.testing.assert_array_equal(spec.kernel_passive, np.eye(spec.num_states))
    np.testing.assert_allclose(spec.reward[:, i, 1], 2 / 3)
    np.testing.assert_array_equal(spec.reward[:, :, 0], 0.0)


def test_bernoulli_outcome_reward_means_match():
    spec = model.build_bernoulli_mab(5, prior=(2, 3))
    mean = np.einsum("tsaj,asj->tsa", spec.outcome_reward, spec.kernels)
    np.testing.assert_allclose(mean, spec.reward, atol=1e-12)


def test_subset_selection_shape():
    spec, rule = model.build_subset_selection(4, 0.3, 0.5)
    assert spec.num_states == 15
    assert spec.horizon == 5
    np.testing.assert_array_equal(spec.reward[:4], 0.0)
    b = rule(10)
    assert b.budgets.tolist() == [5, 5, 5, 5, 3]
    assert rule(1000).budgets.tolist() == [500] * 4 + [300]


def test_floor_fraction_guard():
    assert model.floor_fraction(1 / 3, 12) == 4
    assert model.floor_fraction(1 / 3, 1200) == 400
    assert model.floor_fraction(0.3, 10) == 3


def test_budget_profile_validation():
    with pytest.raises(ValueError):
        BudgetProfile(3, [4])
    with pytest.raises(ValueError):
        BudgetProfile(3, [-1])
    with pytest.raises(ValueError):
        BudgetProfile(3, [1.5])
    b = BudgetProfile.constant(12, 4, 6)
    np.testing.assert_allclose(b.alpha, 1 / 3)
    assert b.is_interior()
    assert not BudgetProfile(3, [0, 3]).is_interior()
    with pytest.raises(ValueError):
        BudgetRule((0.5, 1.0))


def test_validate_reports_each_problem():
    good = model.build_bernoulli_mab(3)
    bad_kernel = good.kernel_active.copy()
    bad_kernel[0, 0] += 0.1
    bad = good.with_arrays(kernel_active=bad_kernel)
    msgs = model.validate(bad)
    assert any("row 0" in m for m in msgs)
    out = good.outcome_reward.copy()
    out[0, 0, 1] *= 2
    assert any("outcome_reward" in m for m in model.validate(good.with_arrays(outcome_reward=out)))
    neg = good.reward.copy()
    neg[0, 0, 0] = -1
    assert any("negative" in m for m in model.validate(good.with_arrays(reward=neg, outcome_reward=None)))
    assert any("initial_state" in m for m in model.validate(good.with_arrays(initial_state=99)))


def test_shape_errors():
    with pytest.raises(ValueError):
        SubProcessSpec(2, 1, 0, np.zeros((1, 3, 2)), np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        SubProcessSpec(2, 1, 0, np.zeros((1, 2, 2)), np.eye(3), np.eye(2))


def test_json_roundtrip(rng):
    for spec in (model.build_bernoulli_mab(3), model.random_spec(rng, 3, 2),
                 model.build_subset_selection(2, 0.3, 0.5)[0]):
        back = SubProcessSpec.from_json(spec.to_json())
        for name in ("reward", "kernel_active", "kernel_passive"):
            np.testing.assert_array_equal(getattr(back, name), getattr(spec, name))
        assert back.labels == spec.labels
        assert back.initial_state == spec.initial_state
        assert json.loads(back.to_json()) == json.loads(spec.to_json())


def test_spec_arrays_are_read_only():
    spec = model.build_bernoulli_mab(2)
    with pytest.raises(ValueError):
        spec.reward[0, 0, 0] = 5.0


def test_random_spec_valid(rng):
    for _ in range(20):
        assert model.validate(model.random_spec(rng, 4, 3)) == []
