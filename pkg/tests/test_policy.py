import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rmab.policy import cutoff_index, rounding, select_activations


@st.composite
def rounding_inputs(draw):
    n = draw(st.integers(1, 8))
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    frac = np.array(raw) / sum(raw)
    total = draw(st.integers(0, 60))
    slack = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    avail = np.ceil(total * frac - 1e-12).astype(int) + np.array(slack)
    return total, frac, avail


@settings(max_examples=500, deadline=None)
@given(rounding_inputs())
def test_rounding_properties(args):
    total, frac, avail = args
    b = rounding(total, frac, avail)
    assert b.sum() == total
    assert (b <= avail).all() and (b >= 0).all()
    assert (np.abs(b - total * frac) <= 1 + 1e-9).all()
    # strict when no target is an integer
    if not np.any(np.isclose(total * frac, np.round(total * frac), atol=1e-9)):
        assert (np.abs(b - total * frac) < 1).all()


def test_rounding_can_be_off_by_exactly_one():
    # remainder goes to the first entry even though its target was already integral
    b = rounding(2, [0.5, 0.25, 0.25], [5, 5, 5])
    assert b.tolist() == [2, 0, 0]


def test_rounding_skips_full_entries():
    assert rounding(3, [0.5, 0.5], [1, 5]).tolist() == [1, 2]
    assert rounding(4, [0.9, 0.1], [2, 2]).tolist() == [2, 2]


def test_rounding_input_errors():
    with pytest.raises(ValueError):
        rounding(5, [0.5, 0.5], [2, 2])
    with pytest.raises(ValueError):
        rounding(2, [0.5, 0.4], [2, 2])
    with pytest.raises(ValueError):
        rounding(-1, [1.0], [1])
    assert rounding(0, [0.3, 0.3], [1, 1]).tolist() == [0, 0]


def test_cutoff_counts_multiplicity():
    counts = np.array([2, 3, 1])
    beta = np.array([0.9, 0.5, 0.1])
    assert cutoff_index(counts, beta, 1) == 0.9
    assert cutoff_index(counts, beta, 2) == 0.9
    assert cutoff_index(counts, beta, 3) == 0.5
    assert cutoff_index(counts, beta, 6) == 0.1


def test_select_strict_order():
    plan = select_activations([2, 3, 1], [0.9, 0.5, 0.1], [0, 0, 0], 4)
    assert plan.tolist() == [2, 2, 0]


def test_select_ties_follow_pull_mass():
    # states 1 and 2 tie at the cutoff; 3 slots left split 2:1 by pull mass
    plan = select_activations([1, 4, 4], [0.9, 0.5, 0.5], [0.1, 0.2, 0.1], 4)
    assert plan.tolist() == [1, 2, 1]


def test_select_ties_fall_back_to_counts():
    plan = select_activations([1, 6, 2], [0.9, 0.5, 0.5], [0.1, 0.0, 0.0], 5)
    assert plan.tolist() == [1, 3, 1]


def test_select_ignores_empty_states():
    plan = select_activations([0, 3, 3], [5.0, 0.5, 0.1], [1.0, 0.2, 0.1], 2)
    assert plan.tolist() == [0, 2, 0]


def test_select_degenerate_budgets():
    assert select_activations([2, 1], [0.1, 0.2], [0, 0], 0).tolist() == [0, 0]
    assert select_activations([2, 1], [0.1, 0.2], [0, 0], 3).tolist() == [2, 1]
    with pytest.raises(ValueError):
        select_activations([2, 1], [0.1, 0.2], [0, 0], 4)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
def test_select_exact_budget(counts, seed):
    counts = np.array(counts)
    assume(counts.sum() > 0)
    rng = np.random.default_rng(seed)
    beta = rng.integers(0, 3, size=len(counts)) / 2.0  # coarse values force ties
    rho = rng.uniform(0, 1, size=len(counts)) * (rng.random(len(counts)) < 0.7)
    m = int(rng.integers(0, counts.sum() + 1))
    plan = select_activations(counts, beta, rho, m)
    assert plan.sum() == m
    assert (plan >= 0).all() and (plan <= counts).all()
    # never pull a lower-index arm while leaving a higher-index one idle
    pulled = beta[plan > 0]
    idle = beta[plan < counts]
    if pulled.size and idle.size:
        assert pulled.min() >= idle.max() - 1e-9
