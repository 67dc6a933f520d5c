"""Command-line runner: ``solve`` builds the precomputed bundle, ``simulate`` runs
policies against it, ``verify`` runs the self-checks.

Exit codes: 2 invalid config, 3 solver failure, 4 bundle/config mismatch,
1 failed verification.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import dp, index, lp, relax, sim, verify
from .model import BudgetRule, SubProcessSpec, build_bernoulli_mab, build_subset_selection, validate

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_MISMATCH = 4

PROBLEMS = ("bernoulli_mab", "subset_selection", "custom_spec_path")
POLICIES = ("index", "ucb", "ocba_m")

DEFAULTS = {
    "problem": None,
    "horizon": None,
    "fraction": None,            # bernoulli_mab: pulls per arm per period
    "fractions": None,           # custom_spec_path: scalar or one per period
    "select_fraction": None,     # subset_selection
    "measure_fraction": None,    # subset_selection
    "spec_path": None,
    "prior": [1, 1],
    "K_list": None,
    "replications": 1000,
    "policies": ["index"],
    "seed": 0,
    "lambda_method": "lp_dual",
    "tolerances": {},
    "ucb_grid": list(sim.DEFAULT_UCB_GRID),
    "ucb_train_replications": 1000,
    "per_replication": False,
}
TOLERANCE_KEYS = {"bisection": index.DEFAULT_TOL, "subgradient_steps": 2000}


class ConfigError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _fraction_ok(f):
    return isinstance(f, (int, float)) and not isinstance(f, bool) and 0 < f < 1


def load_config(path) -> dict:
    """Read and validate a JSON config; unknown keys are an error."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return check_config(raw, base=Path(path).parent)


def check_config(raw, base=Path(".")) -> dict:
    _require(isinstance(raw, dict), "config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    _require(not unknown, f"unknown config keys: {unknown}")
    cfg = {**DEFAULTS, **raw}
    cfg["tolerances"] = dict(cfg["tolerances"] or {})
    bad = sorted(set(cfg["tolerances"]) - set(TOLERANCE_KEYS))
    _require(not bad, f"unknown tolerance keys: {bad}")
    cfg["tolerances"] = {**TOLERANCE_KEYS, **cfg["tolerances"]}

    _require(cfg["problem"] in PROBLEMS, f"problem must be one of {PROBLEMS}")
    K_list = cfg["K_list"]
    _require(isinstance(K_list, list) and K_list and all(isinstance(k, int) and k >= 1 for k in K_list),
             "K_list must be a nonempty list of positive integers")
    _require(isinstance(cfg["replications"], int) and cfg["replications"] >= 1, "replications must be >= 1")
    _require(isinstance(cfg["seed"], int) and cfg["seed"] >= 0, "seed must be a nonnegative integer")
    _require(isinstance(cfg["policies"], list) and cfg["policies"]
             and all(p in POLICIES for p in cfg["policies"]), f"policies must be a subset of {POLICIES}")
    _require(cfg["lambda_method"] in ("lp_dual", "subgradient"), "lambda_method must be lp_dual or subgradient")
    _require(cfg["tolerances"]["bisection"] > 0, "bisection tolerance must be positive")
    _require(isinstance(cfg["ucb_grid"], list) and cfg["ucb_grid"]
             and all(0 <= w <= 5 for w in cfg["ucb_grid"]), "ucb_grid must be a nonempty list within [0, 5]")
    prior = cfg["prior"]
    _require(isinstance(prior, list) and len(prior) == 2 and all(p > 0 for p in prior),
             "prior must be two positive numbers")

    problem = cfg["problem"]
    if problem == "bernoulli_mab":
        _require(isinstance(cfg["horizon"], int) and cfg["horizon"] >= 1, "horizon must be a positive integer")
        _require(_fraction_ok(cfg["fraction"]), "fraction must lie in (0, 1)")
    elif problem == "subset_selection":
        _require(isinstance(cfg["horizon"], int) and cfg["horizon"] >= 1, "horizon must be a positive integer")
        _require(_fraction_ok(cfg["select_fraction"]) and _fraction_ok(cfg["measure_fraction"]),
                 "select_fraction and measure_fraction must lie in (0, 1)")
    else:
        _require(isinstance(cfg["spec_path"], str), "custom_spec_path needs spec_path")
        fr = cfg["fractions"]
        fr_list = fr if isinstance(fr, list) else [fr]
        _require(all(_fraction_ok(f) for f in fr_list), "every fraction must lie in (0, 1)")
        path = Path(cfg["spec_path"])
        cfg["_spec_file"] = str(path if path.is_absolute() else base / path)
    if "ucb" in cfg["policies"]:
        _require(problem != "custom_spec_path", "ucb needs a Bernoulli problem")
    if "ocba_m" in cfg["policies"]:
        _require(problem == "subset_selection", "ocba_m needs the subset_selection problem")
    return cfg


def config_hash(cfg) -> str:
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    if cfg.get("_spec_file"):
        public["spec_sha256"] = hashlib.sha256(Path(cfg["_spec_file"]).read_bytes()).hexdigest()
    blob = json.dumps(public, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_problem(cfg) -> tuple[SubProcessSpec, BudgetRule]:
    problem = cfg["problem"]
    prior = tuple(cfg["prior"])
    if problem == "bernoulli_mab":
        return build_bernoulli_mab(cfg["horizon"], prior), BudgetRule.constant(cfg["fraction"], cfg["horizon"])
    if problem == "subset_selection":
        return build_subset_selection(cfg["horizon"], cfg["select_fraction"], cfg["measure_fraction"], prior)
    try:
        spec = SubProcessSpec.from_json(Path(cfg["_spec_file"]).read_text())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load spec {cfg['spec_path']}: {exc}") from exc
    problems = validate(spec)
    _require(not problems, f"invalid spec: {problems}")
    fr = cfg["fractions"]
    fr = [fr] * spec.horizon if not isinstance(fr, list) else fr
    _require(len(fr) == spec.horizon, f"need {spec.horizon} fractions, got {len(fr)}")
    return spec, BudgetRule(fr)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _header(cfg_hash, seed) -> str:
    return f"config_hash={cfg_hash} seed={seed}"


# --- solve --------------------------------------------------------------------

def solve(cfg) -> dict:
    """Multipliers, occupation measure, policy and index table for ``cfg``."""
    spec, rule = build_problem(cfg)
    tol = cfg["tolerances"]
    alpha = rule.alpha
    reports = []
    if cfg["lambda_method"] == "lp_dual":
        lam = lp.multipliers_from_lp(spec, alpha)
    else:
        # multipliers for the limiting fractions: minimize the per-arm bound
        first = relax.minimize_bound_subgradient(spec, rule(max(cfg["K_list"])),
                                                 steps=int(tol["subgradient_steps"]))
        lam = first.lambda_star
    for K in cfg["K_list"]:
        budget = rule(K)
        q = dp.q_value(spec, lam)
        reports.append(relax.BoundReport(lam, relax.lagrangian_value(spec, lam, budget), q,
                                         cfg["lambda_method"], 0, K, budget.budgets))
    occ = lp.solve_occupation_lp(spec, alpha, lam)
    table = index.index_table(spec, lam, tol["bisection"])
    pi = lp.extract_policy(occ.rho, table.beta, lam)
    return {"spec": spec, "rule": rule, "lambda": lam, "reports": reports,
            "rho": occ.rho, "policy": pi, "table": table, "lp_objective": occ.objective}


def write_bundle(cfg, out: Path, result) -> None:
    h, seed = config_hash(cfg), cfg["seed"]
    out.mkdir(parents=True, exist_ok=True)
    spec = result["spec"]
    q = dp.q_value(spec, result["lambda"])
    alpha = result["rule"].alpha
    doc = {
        "config_hash": h, "seed": seed,
        "lambda_star": result["lambda"].tolist(),
        "q_value": q,
        "alpha": alpha.tolist(),
        "bound_per_arm_limit": q + float(alpha @ result["lambda"]),
        "method": cfg["lambda_method"],
        "reports": [r.to_dict() for r in result["reports"]],
    }
    (out / "lambda.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "indices.csv").write_text(result["table"].to_csv([_header(h, seed)]))
    occ = {
        "config_hash": h, "seed": seed,
        "layout": "rho[state][action][t], policy[state][action][t], t 0-based",
        "rho": result["rho"].tolist(),
        "policy": result["policy"].tolist(),
        "lp_objective": result["lp_objective"],
        "spec": spec.to_dict(),
    }
    (out / "occupation.json").write_text(json.dumps(occ, sort_keys=True) + "\n")


def read_bundle(bundle: Path) -> dict:
    lam_doc = json.loads((bundle / "lambda.json").read_text())
    occ = json.loads((bundle / "occupation.json").read_text())
    spec = SubProcessSpec.from_dict(occ["spec"])
    beta = index.IndexTable.beta_from_csv((bundle / "indices.csv").read_text(),
                                          spec.num_states, spec.horizon)
    return {"config_hash": lam_doc["config_hash"], "lambda": np.array(lam_doc["lambda_star"]),
            "spec": spec, "rho": np.array(occ["rho"]), "policy": np.array(occ["policy"]),
            "beta": beta}


# --- simulate -----------------------------------------------------------------

SUMMARY_COLUMNS = ["policy", "K", "reps", "mean_per_arm", "ci_half", "bound_per_arm", "seed"]


def simulate(cfg, bundle, workers=None) -> list[tuple[sim.SimResult, float]]:
    spec, rule = bundle["spec"], build_problem(cfg)[1]
    lam = bundle["lambda"]
    reps, seed = cfg["replications"], cfg["seed"]
    prior = tuple(cfg["prior"])
    select_last = cfg["problem"] == "subset_selection"
    out = []
    for K in cfg["K_list"]:
        budget = rule(K)
        bound = relax.lagrangian_value(spec, lam, budget) / K
        for name in cfg["policies"]:
            if name == "index":
                res = sim.simulate_index_policy(spec, budget, bundle["beta"], bundle["rho"], reps, seed, workers)
            elif name == "ucb":
                width = sim.pretrain_ucb_width(budget, cfg["ucb_grid"], cfg["ucb_train_replications"],
                                               seed, prior, select_last, workers)
                res = sim.simulate_ucb(budget, width, reps, seed, prior, select_last, workers)
            else:
                res = sim.simulate_ocba_m(budget, reps, seed, prior, workers)
            out.append((res, bound))
    return out


def results_csv(cfg_hash, seed, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {_header(cfg_hash, seed)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for res, bound in rows:
        w.writerow([res.policy, res.num_arms, res.reps, _fmt(res.mean_per_arm),
                    _fmt(res.ci_half), _fmt(bound), res.seed])
    return buf.getvalue()


def replications_csv(cfg_hash, seed, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {_header(cfg_hash, seed)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "K", "rep", "total"])
    for res, _ in rows:
        for i, total in enumerate(res.totals):
            w.writerow([res.policy, res.num_arms, i, _fmt(total)])
    return buf.getvalue()


# --- entry points -------------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    try:
        result = solve(cfg)
    except (lp.LpError, RuntimeError, AssertionError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_bundle(cfg, Path(args.out), result)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    bundle_dir = Path(args.bundle)
    try:
        bundle = read_bundle(bundle_dir)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read bundle {bundle_dir}: {exc}") from exc
    h = config_hash(cfg)
    if bundle["config_hash"] != h:
        print(f"bundle was solved for config {bundle['config_hash']}, this config is {h}", file=sys.stderr)
        return EXIT_MISMATCH
    rows = simulate(cfg, bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(h, cfg["seed"], rows))
    if cfg["per_replication"]:
        (out / "replications.csv").write_text(replications_csv(h, cfg["seed"], rows))
    return 0


def cmd_verify(args) -> int:
    checks = verify.run(args.level)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="compute multipliers, indices and occupation measure")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("simulate", help="simulate policies against a solved bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("verify", help="run the built-in oracle checks")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
