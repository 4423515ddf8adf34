"""Independent brute-force oracles used only by the tests.

Nothing here shares code with the package's computational paths: sum
distributions come from exhaustive path enumeration, binomial tails from
exact integer combinatorics or plain lgamma sums, and scalar formulas are
re-evaluated inline where they are checked.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def all_state_paths(n_states: int, length: int) -> np.ndarray:
    """(n_states^length, length) array of every state sequence (uint8)."""
    if n_states > 255:
        raise ValueError("enumeration oracle handles at most 255 states")
    total = n_states ** length
    idx = np.arange(total, dtype=np.int64)
    out = np.empty((total, length), dtype=np.uint8)
    for pos in range(length - 1, -1, -1):
        out[:, pos] = idx % n_states
        idx //= n_states
    return out


def enum_distribution(model, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of the raw lattice numerator of S_n by exhaustive
    enumeration.

    Returns (offsets, probabilities) with probabilities from products of
    transition entries, summed per lattice value.
    """
    paths = all_state_paths(model.n_states, n + 1)
    prob = model.pi[paths[:, 0]].copy()
    sums = np.zeros(paths.shape[0], dtype=np.int64)
    for t in range(1, n + 1):
        prob *= model.transition[paths[:, t - 1], paths[:, t]]
        sums += model.f_num[paths[:, t]]
    lo, hi = int(sums.min()), int(sums.max())
    dense = np.zeros(hi - lo + 1)
    np.add.at(dense, sums - lo, prob)
    keep = dense > 0.0
    return (np.arange(lo, hi + 1)[keep], dense[keep])


def enum_max_abs_tail(model, n: int, x: float) -> float:
    """P(max_{1<=i<=n} |S_i| >= x) by exhaustive enumeration (centered sums).

    Streams the running sum and running max over time, so memory stays at a
    few vectors of length n_states^(n+1).
    """
    paths = all_state_paths(model.n_states, n + 1)
    prob = model.pi[paths[:, 0]].copy()
    running = np.zeros(paths.shape[0])
    peak = np.zeros(paths.shape[0])
    for t in range(1, n + 1):
        prob *= model.transition[paths[:, t - 1], paths[:, t]]
        running += model.x_values[paths[:, t]]
        np.maximum(peak, np.abs(running), out=peak)
    return float(prob[peak >= x].sum())


def binom_tail_exact(n: int, k0: int) -> float:
    """P(Binomial(n, 1/2) >= k0) in exact rational arithmetic."""
    if k0 > n:
        return 0.0
    total = sum(math.comb(n, k) for k in range(max(k0, 0), n + 1))
    return float(Fraction(total, 2 ** n))


def sign_sum_tail(n: int, t: float) -> float:
    """P(S_n >= t) for a sum of n i.i.d. fair signs, exact combinatorics."""
    k0 = math.ceil((n + t) / 2.0 - 1e-12)
    return binom_tail_exact(n, k0)


def sign_sum_log_tail(n: int, t: float) -> float:
    """log P(S_n >= t) via plain lgamma sums (no scipy)."""
    k0 = max(0, math.ceil((n + t) / 2.0 - 1e-12))
    if k0 > n:
        return -math.inf
    logs = [math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            - n * math.log(2.0) for k in range(k0, n + 1)]
    peak = max(logs)
    return peak + math.log(sum(math.exp(v - peak) for v in logs))


def two_state_cond_sum_norm(rho: float, n: int) -> float:
    """||E[S_n | F_0]||_inf for the symmetric two-state chain, closed form."""
    return rho * (1.0 - rho ** n) / (1.0 - rho)


def two_state_sigma_sq(rho: float, n: int) -> float:
    """sigma_n^2 for the symmetric two-state chain from gamma(k) = rho^k."""
    ks = np.arange(1, n)
    return float(1.0 + 2.0 * np.sum((1.0 - ks / n) * rho ** ks))
