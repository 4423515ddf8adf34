"""Seeded simulation of tails, ratio curves, Kolmogorov distances and the
moderate-deviation scaling diagnostic.

Exact-tier models at reachable horizons should be checked against the DP
oracle instead; simulation exists for everything beyond its reach.  All
output is a pure function of (model, parameters, seed): chains are generated
in fixed-size blocks whose child seeds derive from (seed, block index), and
reductions happen in block order, so any parallel schedule reproduces the
sequential result bit for bit.

Confidence intervals use the Wilson score form, which stays honest when the
tail count is a handful out of many.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .bounds import envelope_curve
from .coefficients import CoefficientSet, coefficient_set
from .errors import (
    ExponentOutOfRange,
    ParamOutOfRange,
    SampledTierUnsupported,
    TooFewSamples,
    ZeroDenominator,
)
from .exact import (
    distribution_of_Sn,
    exact_lower_tail,
    exact_tail,
    long_run_variance,
    sigma_any,
)
from .models import CHAIN_CHUNK, FiniteLatticeModel, _simulate_states, child_rng
from .normal import normal_cdf, normal_log_sf, normal_sf

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ParamOutOfRange("trials must be >= 1")
    p = successes / trials
    z2 = z * z
    center = (p + z2 / (2 * trials)) / (1 + z2 / trials)
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials ** 2)) / (1 + z2 / trials)
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


@dataclass(frozen=True)
class TailEstimate:
    x: float
    estimate: float
    lo: float
    hi: float
    chains: int
    seed: int


def tails_to_csv(estimates: list["TailEstimate"]) -> str:
    lines = ["x,p,lo,hi"]
    lines += [f"{t.x:.17g},{t.estimate:.17g},{t.lo:.17g},{t.hi:.17g}"
              for t in estimates]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RatioCurve:
    """Tail ratios against the normal tail, in both directions, with the
    envelope overlay where coefficients are available."""

    x_grid: np.ndarray
    right: np.ndarray
    left: np.ndarray
    source: str
    right_lo: Optional[np.ndarray] = None
    right_hi: Optional[np.ndarray] = None
    left_lo: Optional[np.ndarray] = None
    left_hi: Optional[np.ndarray] = None
    envelope: Optional[np.ndarray] = None
    envelope_valid: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["x,ratio,lo,hi,envelope,ratio_left,lo_left,hi_left"]
        for i, x in enumerate(self.x_grid):
            def cell(arr):
                return "" if arr is None else f"{arr[i]:.17g}"
            lines.append(",".join([
                f"{x:.17g}", f"{self.right[i]:.17g}", cell(self.right_lo),
                cell(self.right_hi), cell(self.envelope), f"{self.left[i]:.17g}",
                cell(self.left_lo), cell(self.left_hi)]))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate_W(model, n: int, chains: int, seed: int) -> np.ndarray:
    """Samples of W_n = S_n / sqrt(n) over independent stationary trajectories."""
    if chains < 1:
        raise ParamOutOfRange("chains must be >= 1")
    if n < 1:
        raise ParamOutOfRange("n must be >= 1")
    out = np.empty(chains)
    if model.tier == "exact":
        x = model.x_values
        for block, lo in enumerate(range(0, chains, CHAIN_CHUNK)):
            hi = min(lo + CHAIN_CHUNK, chains)
            states = _simulate_states(model, n, hi - lo, child_rng(seed, block))
            out[lo:hi] = x[states[:, 1:]].sum(axis=1)
    else:
        for i in range(chains):
            child = int(np.random.SeedSequence(
                entropy=seed, spawn_key=(i,)).generate_state(1)[0])
            out[i] = model.sampler(child, n).values.sum()
    return out / math.sqrt(n)


def estimate_tails(model, n: int, x_grid, chains: int, seed: int,
                   sigma: Optional[float] = None) -> list[TailEstimate]:
    """Monte Carlo estimates of P(W_n >= x sigma_n) with 95% score intervals."""
    sig = sigma if sigma is not None else sigma_any(model, n)
    w = simulate_W(model, n, chains, seed)
    out = []
    for x in np.asarray(x_grid, dtype=float):
        k = int(np.sum(w >= x * sig))
        lo, hi = wilson_interval(k, chains)
        out.append(TailEstimate(x=float(x), estimate=k / chains, lo=lo, hi=hi,
                                chains=chains, seed=seed))
    return out


# ---------------------------------------------------------------------------
# ratio curves
# ---------------------------------------------------------------------------

def ratio_curve(model, n: int, m: int, x_grid, mode: str = "exact",
                chains: Optional[int] = None, seed: int = 0,
                coeffs: Optional[CoefficientSet] = None, envelope_c: float = 1.0,
                gate_mode: str = "practical") -> RatioCurve:
    """Tail ratios P(W_n >= x sigma_n) / (1 - Phi(x)) and the mirrored left
    ratio, either exact from the DP table or estimated from chains."""
    xs = np.asarray(x_grid, dtype=float)
    if np.any(xs < 0):
        raise ParamOutOfRange("ratio grid must be nonnegative")
    sf = normal_sf(xs)
    if np.any(sf == 0.0):
        raise ZeroDenominator("1 - Phi(x) underflows on this grid; keep x <= 37")

    if coeffs is None and model.tier == "exact":
        coeffs = coefficient_set(model, n, m)
    env = env_valid = None
    if coeffs is not None:
        curve = envelope_curve(coeffs, xs, envelope_c, gate_mode)
        env, env_valid = curve.value, curve.valid

    if mode == "exact":
        if model.tier != "exact":
            raise SampledTierUnsupported("exact ratio mode needs an exact-tier model")
        table = distribution_of_Sn(model, n)
        log_sf = normal_log_sf(xs)
        right = np.exp(exact_tail(table, xs) - log_sf)
        left = np.exp(exact_lower_tail(table, xs) - log_sf)
        return RatioCurve(x_grid=xs, right=right, left=left, source="exact",
                          envelope=env, envelope_valid=env_valid,
                          meta={"n": n, "m": m})
    if mode != "mc":
        raise ParamOutOfRange(f"mode must be exact or mc, got {mode!r}")
    if chains is None:
        raise ParamOutOfRange("mc mode needs a chains count")
    sig = coeffs.sigma_n if coeffs is not None else sigma_any(model, n)
    w = simulate_W(model, n, chains, seed)
    right = np.empty_like(xs)
    left = np.empty_like(xs)
    r_lo, r_hi, l_lo, l_hi = (np.empty_like(xs) for _ in range(4))
    for i, x in enumerate(xs):
        kr = int(np.sum(w >= x * sig))
        kl = int(np.sum(w <= -x * sig))
        right[i] = kr / chains / sf[i]
        left[i] = kl / chains / sf[i]
        lo, hi = wilson_interval(kr, chains)
        r_lo[i], r_hi[i] = lo / sf[i], hi / sf[i]
        lo, hi = wilson_interval(kl, chains)
        l_lo[i], l_hi[i] = lo / sf[i], hi / sf[i]
    return RatioCurve(x_grid=xs, right=right, left=left, source="mc",
                      right_lo=r_lo, right_hi=r_hi, left_lo=l_lo, left_hi=l_hi,
                      envelope=env, envelope_valid=env_valid,
                      meta={"n": n, "m": m, "chains": chains, "seed": seed})


# ---------------------------------------------------------------------------
# Kolmogorov distance and MDP scaling
# ---------------------------------------------------------------------------

def empirical_ks(samples, sigma_n: float) -> float:
    """Kolmogorov distance between the empirical law of W_n / sigma_n and the
    standard normal, evaluated on both sides of every jump."""
    w = np.sort(np.asarray(samples, dtype=float)) / sigma_n
    n = w.size
    if n < 100:
        raise TooFewSamples(f"need at least 100 samples, got {n}")
    phi = normal_cdf(w)
    upper = np.max(np.arange(1, n + 1) / n - phi)
    lower = np.max(phi - np.arange(0, n) / n)
    return float(max(upper, lower))


@dataclass(frozen=True)
class MdpDiagnostic:
    """Scaled log tails a_n^2 ln P(a_n W_n >= c) along a horizon grid, next to
    the claimed limit -c^2 / (2 sigma^2)."""

    c: float
    a_exponent: float
    n_grid: np.ndarray
    scaled: np.ndarray
    limit: float

    def to_csv(self) -> str:
        lines = ["n,scaled_log_tail,limit"]
        lines += [f"{int(n)},{v:.17g},{self.limit:.17g}"
                  for n, v in zip(self.n_grid, self.scaled)]
        return "\n".join(lines) + "\n"


def mdp_diagnostic(model, c: float, a_exponent: float, n_grid,
                   budget_bytes: Optional[int] = None) -> MdpDiagnostic:
    """a_n = n^{-a}: compute a_n^2 ln P(W_n >= c / a_n) exactly along n_grid.

    I.i.d. sign models use the closed-form binomial tail in log space, which
    reaches n = 10^6 in milliseconds; other exact models go through the DP
    oracle (subject to the memory budget).
    """
    if not 0.0 < a_exponent < 0.5:
        raise ExponentOutOfRange(f"a_exponent must lie in (0, 1/2), got {a_exponent}")
    if c < 0:
        raise ParamOutOfRange("c must be >= 0")
    ns = np.asarray(n_grid, dtype=np.int64)
    scaled = np.empty(ns.size)
    for i, n in enumerate(ns):
        an = float(n) ** -a_exponent
        threshold = c / an  # in W_n units
        if _is_iid_sign(model):
            logp = _binomial_log_tail(int(n), threshold * math.sqrt(n))
        else:
            kwargs = {} if budget_bytes is None else {"budget_bytes": budget_bytes}
            table = distribution_of_Sn(model, int(n), **kwargs)
            logp = float(exact_tail(table, threshold / table.sigma_n))
        scaled[i] = an * an * logp
    sig_sq = 1.0 if _is_iid_sign(model) else long_run_variance(model)
    limit = -c * c / (2.0 * sig_sq)
    return MdpDiagnostic(c=c, a_exponent=a_exponent, n_grid=ns, scaled=scaled,
                         limit=limit)


def _is_iid_sign(model) -> bool:
    if not isinstance(model, FiniteLatticeModel):
        return False
    rows_equal = np.all(model.transition == model.transition[0])
    return bool(rows_equal and sorted(model.x_values.tolist()) == [-1.0, 1.0]
                and np.allclose(model.pi, 0.5))


def _binomial_log_tail(n: int, t: float) -> float:
    """log P(S_n >= t) for S_n a sum of n i.i.d. fair signs."""
    k0 = max(0, math.ceil((n + t) / 2.0 - 1e-12))
    if k0 > n:
        return -math.inf
    ks = np.arange(k0, n + 1)
    logs = gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1) - n * math.log(2.0)
    return float(logsumexp(logs))
