"""Picking the best 30% of designs after four rounds of measuring half of them.

Measurement periods pay nothing; the final period pays the posterior mean of
each selected design. Compared: the index policy, UCB, and OCBA-m adapted to
one sample per design per round.
Pass a replication count as the first argument (default 2000).
"""
import sys

from rmab import cli

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
cfg = cli.check_config({
    "problem": "subset_selection", "horizon": 4, "select_fraction": 0.3, "measure_fraction": 0.5,
    "K_list": [10, 100, 1000], "replications": reps, "policies": ["index", "ucb", "ocba_m"], "seed": 0,
})
solved = cli.solve(cfg)
print("prices per period:", [round(x, 5) for x in solved["lambda"]])
bundle = {"spec": solved["spec"], "lambda": solved["lambda"], "rho": solved["rho"],
          "beta": solved["table"].beta}
for res, bound in cli.simulate(cfg, bundle):
    lo, hi = res.ci()
    print(f"K={res.num_arms:5d} {res.policy:7s} {res.mean_per_arm:.5f} [{lo:.5f}, {hi:.5f}]  bound {bound:.5f}")
