"""Indices: the highest price at which pulling a state still pays.

For each posterior state (a, b) and period t, bisection finds the period-t
price where the single arm stops wanting to be pulled. States priced above the
period's multiplier are always pulled by the LP policy, states below never.
"""
import numpy as np

from rmab import index, lp, model

spec = model.build_bernoulli_mab(6)
alpha = np.full(6, 1 / 3)
lam = lp.multipliers_from_lp(spec, alpha)
table = index.index_table(spec, lam)
occ = lp.solve_occupation_lp(spec, alpha, lam)
pi = lp.extract_policy(occ.rho, table.beta, lam)

print("state    " + "  ".join(f"t={t + 1:<5d}" for t in range(6)))
for s, (a, b) in enumerate(spec.labels):
    cells = []
    for t in range(6):
        mark = "*" if pi[s, 1, t] > 0.999 else ("~" if pi[s, 1, t] > 1e-9 else " ")
        cells.append(f"{table.beta[s, t]:6.3f}{mark}")
    print(f"({a},{b})    " + " ".join(cells))
print("multiplier " + " ".join(f"{x:6.3f} " for x in lam))
print("* always pulled, ~ pulled with some probability, under the LP policy")

# the last period index is just the posterior mean
assert np.allclose(table.beta[:, -1], spec.reward[-1, :, 1], atol=1e-6)
