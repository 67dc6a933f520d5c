"""Finite-horizon restless bandits with many arms: Lagrangian bound, occupation LP,
index policy and Monte-Carlo evaluation."""
from .model import (BudgetProfile, BudgetRule, SubProcessSpec, build_bernoulli_mab,
                    build_subset_selection, random_spec, validate)
from .dp import activation_profile, backward_induction, evaluate_policy, greedy_policy, q_value, state_marginals
from .relax import BoundReport, lagrangian_value, minimize_bound
from .lp import extract_policy, multipliers_from_lp, simplex_solve, solve_occupation_lp
from .index import IndexTable, compute_index, index_table
from .policy import rounding, select_activations
from .sim import SimResult, simulate_index_policy, simulate_ocba_m, simulate_ucb

__version__ = "0.1.0"
