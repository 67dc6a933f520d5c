"""How good can any policy be? The Lagrangian bound for the Bernoulli bandit.

Each arm is a Bayesian Bernoulli bandit with a uniform prior, six periods, and
a third of the arms pulled every period. Pricing each pull at lam_t decouples
the arms; the best prices come from the occupation LP's duals, and subgradient
descent on the bound lands in the same place.
"""
import numpy as np

from rmab import dp, lp, model, relax

spec = model.build_bernoulli_mab(6)
print(f"{spec.num_states} posterior states, initial state {spec.labels[spec.initial_state]}")

budget = model.BudgetProfile.constant(12, 4, 6)
exact = relax.minimize_bound_lp(spec, budget)
approx = relax.minimize_bound_subgradient(spec, budget)

np.set_printoptions(precision=5, suppress=True)
print("prices from LP duals   ", exact.lambda_star)
print("prices from subgradient", approx.lambda_star)
print(f"bound per arm: {exact.bound_per_arm:.6f} (LP) vs {approx.bound_per_arm:.6f} (subgradient)")

# the bound splits into K copies of the priced single-arm value plus the budget rent
q = dp.q_value(spec, exact.lambda_star)
print(f"K*Q + m.lam = {12 * q + budget.budgets @ exact.lambda_star:.6f}, P = {exact.bound_value:.6f}")

# with pulls priced at lam*, the LP and the dynamic program agree
occ = lp.solve_occupation_lp(spec, budget.alpha, exact.lambda_star)
print(f"LP value at those prices: {occ.objective:.6f} = Q(lam*) = {q:.6f}")
