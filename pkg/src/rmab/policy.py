"""The index policy acting on per-state arm counts, with proportional tie-breaking."""
from __future__ import annotations

import math

import numpy as np

TIE_BAND = 1e-9
MASS_FLOOR = 1e-10


def rounding(total: int, frac, avail) -> np.ndarray:
    """Integer split of ``total`` across entries, roughly ``total * frac``.

    Floors first (capped by ``avail``), then hands out the remainder one unit
    at a time, cycling through entries from the first and skipping any entry
    already at its cap.
    """
    frac = np.asarray(frac, dtype=float)
    avail = np.asarray(avail, dtype=int)
    if frac.shape != avail.shape:
        raise ValueError("frac and avail must have the same length")
    if total < 0 or np.any(avail < 0) or np.any(frac < 0):
        raise ValueError("inputs must be nonnegative")
    if total > avail.sum():
        raise ValueError(f"cannot place {total} units in {int(avail.sum())} available slots")
    if total == 0:
        return np.zeros(len(frac), dtype=int)
    if abs(frac.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {frac.sum()!r}, not 1")
    b = np.minimum(avail, [math.floor(total * f) for f in frac]).astype(int)
    n = len(b)
    j = 0
    while total > b.sum():
        if avail[j] > b[j]:
            b[j] += 1
        j = (j + 1) % n
    return b


def cutoff_index(counts, beta_t, m: int) -> float:
    """The m-th largest index among the arms (counted with multiplicity)."""
    occupied = np.flatnonzero(counts > 0)
    order = occupied[np.argsort(-beta_t[occupied], kind="stable")]
    cum = np.cumsum(counts[order])
    return float(beta_t[order[np.searchsorted(cum, m)]])


def select_activations(counts, beta_t, rho_active_t, m: int) -> np.ndarray:
    """Number of arms to pull in each state this period.

    ``counts[s]`` arms sit in state s, ``beta_t[s]`` is that state's index and
    ``rho_active_t[s]`` the occupation mass of pulling in s. States above the
    cutoff are pulled in full, states below are left alone, and the leftover
    budget is spread over the tied states in proportion to their pull mass
    (or to their counts when that mass is zero).
    """
    counts = np.asarray(counts, dtype=int)
    beta_t = np.asarray(beta_t, dtype=float)
    K = int(counts.sum())
    if not 0 <= m <= K:
        raise ValueError(f"budget {m} outside [0, {K}]")
    plan = np.zeros(len(counts), dtype=int)
    if m == 0:
        return plan
    cutoff = cutoff_index(counts, beta_t, m)
    occupied = counts > 0
    above = occupied & (beta_t > cutoff + TIE_BAND)
    tied = np.flatnonzero(occupied & (np.abs(beta_t - cutoff) <= TIE_BAND))
    assert tied.size > 0
    plan[above] = counts[above]
    remaining = m - int(counts[above].sum())
    weights = np.clip(np.asarray(rho_active_t, dtype=float)[tied], 0.0, None)
    if weights.sum() > MASS_FLOOR:
        q = weights / weights.sum()
    else:
        q = counts[tied] / counts[tied].sum()
    plan[tied] = rounding(remaining, q, counts[tied])
    return plan
