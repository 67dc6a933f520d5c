"""The index policy against UCB as the number of arms grows.

The bound per arm is the same for every K; the index policy closes the gap to
it as K grows, while a tuned UCB stays a fixed distance below.
Pass a replication count as the first argument (default 1000).
"""
import sys

from rmab import cli

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
cfg = cli.check_config({
    "problem": "bernoulli_mab", "horizon": 6, "fraction": 1 / 3,
    "K_list": [12, 120, 1200], "replications": reps, "policies": ["index", "ucb"], "seed": 0,
})
solved = cli.solve(cfg)
bundle = {"spec": solved["spec"], "lambda": solved["lambda"], "rho": solved["rho"],
          "beta": solved["table"].beta}

print(f"{'policy':8s} {'K':>5s} {'mean/arm':>9s} {'ci':>8s} {'bound':>8s} {'gap':>8s}")
for res, bound in cli.simulate(cfg, bundle):
    print(f"{res.policy:8s} {res.num_arms:5d} {res.mean_per_arm:9.4f} {res.ci_half:8.4f} "
          f"{bound:8.4f} {bound - res.mean_per_arm:8.4f}")
