import numpy as np
import pytest

from rmab import index, lp, model


@pytest.fixture(scope="session")
def mab():
    """Six-period Bernoulli bandit arm solved at one pull per three arms."""
    spec = model.build_bernoulli_mab(6)
    alpha = np.full(6, 1 / 3)
    lam = lp.multipliers_from_lp(spec, alpha)
    occ = lp.solve_occupation_lp(spec, alpha, lam)
    table = index.index_table(spec, lam)
    pi = lp.extract_policy(occ.rho, table.beta, lam)
    return {"spec": spec, "alpha": alpha, "lam": lam, "occ": occ, "table": table,
            "policy": pi, "rule": model.BudgetRule.constant(1 / 3, 6)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
