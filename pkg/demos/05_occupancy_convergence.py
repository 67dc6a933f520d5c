"""With many arms, the fraction of arms in each state follows the single-arm LP policy.

For K = 12, 120, 1200 we track N_t(s)/K (arms in state s) and M_t(s)/K (arms
pulled in s) under the index policy and compare them with the state marginals
of the LP policy. The largest deviation shrinks roughly like 1/sqrt(K).
"""
import numpy as np

from rmab import index, lp, model, sim

spec = model.build_bernoulli_mab(6)
rule = model.BudgetRule.constant(1 / 3, 6)
lam = lp.multipliers_from_lp(spec, rule.alpha)
occ = lp.solve_occupation_lp(spec, rule.alpha, lam)
table = index.index_table(spec, lam)
pi = lp.extract_policy(occ.rho, table.beta, lam)

rows = sim.occupancy_convergence_report(spec, rule, (12, 120, 1200), table, occ.rho, pi, 500, 0)
print(f"{'K':>5s} {'max |N/K - P|':>14s} {'max |M/K - P pi|':>17s} {'x sqrt(K)':>10s}")
for r in rows:
    print(f"{r['K']:5d} {r['state_deviation']:14.4f} {r['pull_deviation']:17.4f} "
          f"{r['state_deviation'] * np.sqrt(r['K']):10.3f}")
