"""Single-arm problem data and the two experimental instance builders.

Arrays use 0-based periods internally: ``reward[t, s, a]`` is the reward of
action ``a`` in state ``s`` at period ``t + 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubProcessSpec:
    """One arm: finite state space, two actions, finite horizon.

    ``kernels[a]`` is the transition matrix under action ``a`` (``a=1`` active).
    ``outcome_reward[t, s, a, s2]``, when given, is the reward realised on the
    transition ``s -> s2``; simulators use it in place of the expected reward.
    Its conditional mean must equal ``reward``.
    """

    num_states: int
    horizon: int
    initial_state: int
    reward: np.ndarray
    kernel_active: np.ndarray
    kernel_passive: np.ndarray
    labels: Optional[tuple] = None
    outcome_reward: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("reward", "kernel_active", "kernel_passive", "outcome_reward"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        n, T = self.num_states, self.horizon
        if self.reward.shape != (T, n, 2):
            raise ValueError(f"reward has shape {self.reward.shape}, expected {(T, n, 2)}")
        for name in ("kernel_active", "kernel_passive"):
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(n, n)}")
        if self.outcome_reward is not None and self.outcome_reward.shape != (T, n, 2, n):
            raise ValueError("outcome_reward must have shape (T, S, 2, S)")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def kernels(self) -> np.ndarray:
        """Stacked kernels, shape (2, S, S), indexed by action."""
        return np.stack([self.kernel_passive, self.kernel_active])

    @property
    def max_reward(self) -> float:
        return float(self.reward.max())

    def index_bound(self) -> float:
        """T times the largest reward: bounds the index and the useful multipliers."""
        return self.horizon * self.max_reward

    def to_dict(self) -> dict:
        doc = {
            "num_states": self.num_states,
            "horizon": self.horizon,
            "initial_state": self.initial_state,
            "reward": self.reward.tolist(),
            "kernel_active": self.kernel_active.tolist(),
            "kernel_passive": self.kernel_passive.tolist(),
        }
        if self.labels is not None:
            doc["labels"] = [list(l) if isinstance(l, tuple) else l for l in self.labels]
        if self.outcome_reward is not None:
            doc["outcome_reward"] = self.outcome_reward.tolist()
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SubProcessSpec":
        labels = doc.get("labels")
        if labels is not None:
            labels = tuple(tuple(l) if isinstance(l, list) else l for l in labels)
        return cls(
            num_states=int(doc["num_states"]),
            horizon=int(doc["horizon"]),
            initial_state=int(doc["initial_state"]),
            reward=np.asarray(doc["reward"], dtype=float),
            kernel_active=np.asarray(doc["kernel_active"], dtype=float),
            kernel_passive=np.asarray(doc["kernel_passive"], dtype=float),
            labels=labels,
            outcome_reward=None if doc.get("outcome_reward") is None
            else np.asarray(doc["outcome_reward"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "SubProcessSpec":
        return cls.from_dict(json.loads(text))

    def with_arrays(self, **changes) -> "SubProcessSpec":
        """Copy with some fields replaced (specs are immutable)."""
        fields = dict(
            num_states=self.num_states, horizon=self.horizon,
            initial_state=self.initial_state, reward=self.reward,
            kernel_active=self.kernel_active, kernel_passive=self.kernel_passive,
            labels=self.labels, outcome_reward=self.outcome_reward,
        )
        fields.update(changes)
        return SubProcessSpec(**fields)


@dataclass(frozen=True, eq=False)
class BudgetProfile:
    """Number of arms ``num_arms`` and per-period activation counts ``budgets``.

    Construction accepts ``0 <= m_t <= K`` so degenerate joint problems can be
    simulated; :meth:`is_interior` reports whether every fraction lies in (0, 1),
    which the LP and the index policy require.
    """

    num_arms: int
    budgets: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.budgets)
        if b.ndim != 1 or not np.all(b == np.round(b)):
            raise ValueError("budgets must be a vector of integers")
        b = b.astype(int)
        if self.num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        if np.any(b < 0) or np.any(b > self.num_arms):
            raise ValueError(f"budgets {b.tolist()} outside [0, {self.num_arms}]")
        b.setflags(write=False)
        object.__setattr__(self, "budgets", b)

    @classmethod
    def constant(cls, num_arms: int, m: int, horizon: int) -> "BudgetProfile":
        return cls(num_arms, np.full(horizon, m, dtype=int))

    @classmethod
    def from_fractions(cls, num_arms: int, fractions: Sequence[float]) -> "BudgetProfile":
        return cls(num_arms, np.array([floor_fraction(f, num_arms) for f in fractions]))

    @property
    def horizon(self) -> int:
        return len(self.budgets)

    @property
    def alpha(self) -> np.ndarray:
        return self.budgets / self.num_arms

    def is_interior(self) -> bool:
        return bool(np.all(self.budgets > 0) and np.all(self.budgets < self.num_arms))


@dataclass(frozen=True)
class BudgetRule:
    """Per-period activation fractions; calling it with K gives the budget."""

    fractions: tuple

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if any(not 0 < f < 1 for f in fr):
            raise ValueError(f"fractions must lie in (0, 1), got {fr}")
        object.__setattr__(self, "fractions", fr)

    @classmethod
    def constant(cls, fraction: float, horizon: int) -> "BudgetRule":
        return cls((fraction,) * horizon)

    @property
    def alpha(self) -> np.ndarray:
        return np.array(self.fractions)

    def __call__(self, num_arms: int) -> BudgetProfile:
        return BudgetProfile.from_fractions(num_arms, self.fractions)


def floor_fraction(fraction: float, num_arms: int) -> int:
    # 1e-9 guard: 1/3 * 12 evaluates to 3.9999999999999996
    return int(math.floor(fraction * num_arms + 1e-9))


def validate(spec: SubProcessSpec) -> list[str]:
    """Every invariant violation of ``spec``, as readable strings."""
    problems = []
    n = spec.num_states
    if n < 1:
        problems.append("num_states must be >= 1")
    if spec.horizon < 1:
        problems.append("horizon must be >= 1")
    if not 0 <= spec.initial_state < n:
        problems.append(f"initial_state {spec.initial_state} not in [0, {n})")
    for name in ("kernel_active", "kernel_passive"):
        P = getattr(spec, name)
        if not np.all(np.isfinite(P)):
            problems.append(f"{name} has non-finite entries")
            continue
        for s, row in enumerate(P):
            bad = np.flatnonzero((row < 0) | (row > 1))
            for s2 in bad:
                problems.append(f"{name}[{s}][{s2}] = {row[s2]!r} outside [0, 1]")
            total = row.sum()
            if abs(total - 1.0) > ROW_SUM_TOL:
                problems.append(f"{name} row {s} sums to {total!r}, not 1")
    r = spec.reward
    for t, s, a in zip(*np.nonzero(~np.isfinite(r))):
        problems.append(f"reward[t={t + 1}][s={s}][a={a}] is not finite")
    for t, s, a in zip(*np.nonzero(np.isfinite(r) & (r < 0))):
        problems.append(f"reward[t={t + 1}][s={s}][a={a}] = {r[t, s, a]!r} is negative")
    if spec.outcome_reward is not None:
        K = spec.kernels
        mean = np.einsum("tsaj,asj->tsa", spec.outcome_reward, K)
        for t, s, a in zip(*np.nonzero(np.abs(mean - r) > 1e-9)):
            problems.append(
                f"outcome_reward mean at t={t + 1}, s={s}, a={a} is {mean[t, s, a]!r}, "
                f"reward is {r[t, s, a]!r}")
    if spec.labels is not None and len(spec.labels) != n:
        problems.append(f"{len(spec.labels)} labels for {n} states")
    return problems


def _posterior_lattice(prior, max_total):
    a0, b0 = prior
    states = []
    for total in range(a0 + b0, max_total + 1):
        for a in range(a0, total - b0 + 1):
            states.append((a, total - a))
    return states


def _check_prior(prior):
    a0, b0 = prior
    if int(a0) != a0 or int(b0) != b0 or a0 < 1 or b0 < 1:
        raise ValueError(f"prior must be a pair of integers >= 1, got {prior!r}")
    return int(a0), int(b0)


def _beta_bernoulli_kernels(states):
    """Active: posterior update; passive: identity. Boundary states self-loop."""
    pos = {st: i for i, st in enumerate(states)}
    n = len(states)
    active = np.zeros((n, n))
    for i, (a, b) in enumerate(states):
        up, down = (a + 1, b), (a, b + 1)
        if up in pos and down in pos:
            active[i, pos[up]] = a / (a + b)
            active[i, pos[down]] = b / (a + b)
        else:
            active[i, i] = 1.0
    return active, np.eye(n), pos


def build_bernoulli_mab(horizon: int, prior=(1, 1)) -> SubProcessSpec:
    """Bayesian Bernoulli bandit arm with a Beta prior.

    States are posterior parameters ``(a, b)`` reachable within ``horizon - 1``
    pulls. Pulling earns the posterior mean in expectation; the realised reward
    is 1 on a success transition. States on the outer boundary are only
    reachable in the last period, where their transition is irrelevant, so
    they self-loop and realise their mean.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    a0, b0 = _check_prior(prior)
    states = _posterior_lattice((a0, b0), a0 + b0 + horizon - 1)
    active, passive, pos = _beta_bernoulli_kernels(states)
    n = len(states)
    means = np.array([a / (a + b) for a, b in states])
    reward = np.zeros((horizon, n, 2))
    reward[:, :, 1] = means
    outcome = np.zeros((horizon, n, 2, n))
    for i, (a, b) in enumerate(states):
        if active[i, i] == 1.0:
            outcome[:, i, 1, i] = means[i]
        else:
            outcome[:, i, 1, pos[(a + 1, b)]] = 1.0
    return SubProcessSpec(n, horizon, pos[(a0, b0)], reward, active, passive,
                          labels=tuple(states), outcome_reward=outcome)


def build_subset_selection(measure_horizon: int, select_fraction: float,
                           measure_fraction: float, prior=(1, 1)
                           ) -> tuple[SubProcessSpec, BudgetRule]:
    """Top-m subset selection with binary measurements as a restless bandit.

    Periods ``1..T`` measure (pull = one Bernoulli sample, no reward). Period
    ``T + 1`` is the selection: pulling there earns the posterior mean. Returns
    the arm spec and the rule mapping K to the time-varying budget.
    """
    if measure_horizon < 1:
        raise ValueError("measure_horizon must be >= 1")
    for name, f in (("select_fraction", select_fraction), ("measure_fraction", measure_fraction)):
        if not 0 < f < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {f!r}")
    a0, b0 = _check_prior(prior)
    T = measure_horizon
    states = _posterior_lattice((a0, b0), a0 + b0 + T)
    active, passive, pos = _beta_bernoulli_kernels(states)
    n = len(states)
    reward = np.zeros((T + 1, n, 2))
    reward[T, :, 1] = [a / (a + b) for a, b in states]
    spec = SubProcessSpec(n, T + 1, pos[(a0, b0)], reward, active, passive,
                          labels=tuple(states))
    return spec, BudgetRule((measure_fraction,) * T + (select_fraction,))


def random_spec(rng: np.random.Generator, num_states: int, horizon: int,
                max_reward: float = 1.0) -> SubProcessSpec:
    """Random dense instance for oracle checks."""
    reward = rng.uniform(0, max_reward, size=(horizon, num_states, 2))
    active = rng.dirichlet(np.ones(num_states), size=num_states)
    passive = rng.dirichlet(np.ones(num_states), size=num_states)
    # dirichlet rows can miss 1 by a few ulps
    active /= active.sum(axis=1, keepdims=True)
    passive /= passive.sum(axis=1, keepdims=True)
    return SubProcessSpec(num_states, horizon, int(rng.integers(num_states)),
                          reward, active, passive)
