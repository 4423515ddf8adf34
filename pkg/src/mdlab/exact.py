"""Exact computations for finite lattice models.

Everything here is deterministic linear algebra on the chain: stationary
autocovariances, the normalized-sum standard deviation, per-state conditional
block moments, and the full distribution of the partial sum S_n by dynamic
programming over (state, lattice value).  All probability mass is accumulated
in log space, so tails far below the double-precision linear range remain
representable.

The resulting TailTable is the brute-force oracle that every bound and every
Monte Carlo estimate in the package is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    BudgetExceeded,
    DegenerateVariance,
    MdlabError,
    OutOfRange,
    ParamOutOfRange,
)
from .models import FiniteLatticeModel, _require_exact
from .normal import normal_cdf

DEFAULT_BUDGET_BYTES = 2 << 30  # 2 GiB
MASS_TOL = 1e-10


@dataclass(frozen=True)
class TailTable:
    """Exact law of the partial sum S_n from a stationary start.

    ``offsets`` are the integer lattice numerators of the raw payoff sums:
    the centered sum takes the value offsets[i] / denom - center with
    log-probability logp[i], where ``center`` is n times the stationary
    payoff mean (exactly zero for symmetric models).  ``sigma_n`` is the
    standard deviation of W_n = S_n / sqrt(n).
    """

    n: int
    denom: int
    offsets: np.ndarray
    logp: np.ndarray
    sigma_n: float
    center: float = 0.0

    @property
    def sum_values(self) -> np.ndarray:
        """Support of S_n."""
        return self.offsets / self.denom - self.center

    @property
    def w_values(self) -> np.ndarray:
        """Support of W_n = S_n / sqrt(n)."""
        return self.sum_values / np.sqrt(self.n)

    @property
    def what_values(self) -> np.ndarray:
        """Support of the fully normalized sum W_n / sigma_n."""
        return self.w_values / self.sigma_n

    def probabilities(self) -> np.ndarray:
        return np.exp(self.logp)

    def cdf_points(self) -> np.ndarray:
        """Cumulative probabilities at the atoms (last snapped to 1)."""
        cdf = np.cumsum(self.probabilities())
        cdf[-1] = 1.0
        return cdf

    def to_json_dict(self) -> dict:
        return {
            "schema": "tail_table/1",
            "n": self.n,
            "denom": self.denom,
            "sigma_n": self.sigma_n,
            "center": self.center,
            "offsets": [int(k) for k in self.offsets],
            "logp": [float(v) for v in self.logp],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TailTable":
        if obj.get("schema") != "tail_table/1":
            raise OutOfRange(f"unsupported tail table schema {obj.get('schema')!r}")
        return cls(n=int(obj["n"]), denom=int(obj["denom"]),
                   offsets=np.asarray(obj["offsets"], dtype=np.int64),
                   logp=np.asarray(obj["logp"], dtype=float),
                   sigma_n=float(obj["sigma_n"]), center=float(obj.get("center", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def to_csv(self) -> str:
        lines = ["sum,logp"]
        lines += [f"{int(k)},{v:.17g}" for k, v in zip(self.offsets, self.logp)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ConditionalMoments:
    """Per-state conditional first and second moments of a block sum."""

    m: int
    mean_by_state: np.ndarray
    second_by_state: np.ndarray

    @property
    def sup_mean(self) -> float:
        return float(np.max(np.abs(self.mean_by_state)))

    def sup_second_dev(self, sigma_n: float) -> float:
        """Uniform deviation of the normalized conditional second moment from 1,
        measured against the ambient n's sigma_n."""
        return float(np.max(np.abs(self.second_by_state / (self.m * sigma_n ** 2) - 1.0)))


# ---------------------------------------------------------------------------
# covariances and sigma_n
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _autocov_prefix(model: FiniteLatticeModel, kmax: int) -> np.ndarray:
    """gamma(0..kmax) under the stationary law."""
    x = model.x_values
    out = np.empty(kmax + 1)
    u = x.copy()
    out[0] = float(model.pi @ (x * x))
    for k in range(1, kmax + 1):
        u = model.transition @ u
        out[k] = float(model.pi @ (x * u))
    return out


def autocovariance(model: FiniteLatticeModel, k: int) -> float:
    """Cov(X_0, X_k) of the centered payoff under the stationary law."""
    _require_exact(model)
    if k < 0:
        raise ParamOutOfRange("lag must be >= 0")
    return float(_autocov_prefix(model, k)[k])


def sigma_n(model: FiniteLatticeModel, n: int) -> float:
    """Standard deviation of W_n = S_n / sqrt(n):
    sigma_n^2 = gamma(0) + 2 sum_{k<n} (1 - k/n) gamma(k)."""
    _require_exact(model)
    if n < 1:
        raise ParamOutOfRange("n must be >= 1")
    g = _autocov_prefix(model, n - 1)
    ks = np.arange(1, n)
    var = g[0] + 2.0 * np.sum((1.0 - ks / n) * g[1:])
    if var <= 1e-14:
        raise DegenerateVariance(f"sigma_n^2 = {var!r} at n = {n}")
    return float(np.sqrt(var))


def sigma_any(model, n: int) -> float:
    """sigma_n for either tier: exact recursion on the lattice, or the same
    weighted sum over a sampled model's analytic autocovariances."""
    if getattr(model, "tier", None) == "exact":
        return sigma_n(model, n)
    if getattr(model, "autocov", None) is None:
        raise DegenerateVariance(
            f"{model.name!r} has no analytic autocovariance; sigma_n unavailable")
    g = np.array([model.autocov(k) for k in range(n)])
    ks = np.arange(1, n)
    var = g[0] + 2.0 * float(np.sum((1.0 - ks / n) * g[1:]))
    if var <= 1e-14:
        raise DegenerateVariance(f"sigma_n^2 = {var!r} at n = {n}")
    return float(np.sqrt(var))


def poisson_solution(model: FiniteLatticeModel) -> np.ndarray:
    """h(s) = sum_{k>=1} E[X_k | Y_0 = s], by solving (I - P + 1 pi^T) h = P x."""
    _require_exact(model)
    p = model.transition
    x = model.x_values
    a = np.eye(model.n_states) - p + np.outer(np.ones(model.n_states), model.pi)
    return np.linalg.solve(a, p @ x)


def long_run_variance(model: FiniteLatticeModel) -> float:
    """sigma^2 = gamma(0) + 2 sum_{k>=1} gamma(k), in closed form."""
    x = model.x_values
    h = poisson_solution(model)
    var = float(model.pi @ (x * x) + 2.0 * model.pi @ (x * h))
    if var <= 1e-14:
        raise DegenerateVariance(f"long-run variance {var!r}")
    return var


def conditional_sum_norms(model: FiniteLatticeModel, n_max: int) -> np.ndarray:
    """Uniform norms of the conditional sums: ||E[S_t | F_0]||_inf, t = 1..n_max."""
    _require_exact(model)
    x = model.x_values
    u = x.copy()
    g = np.zeros(model.n_states)
    out = np.empty(n_max)
    for t in range(1, n_max + 1):
        u = model.transition @ u
        g = g + u
        out[t - 1] = float(np.max(np.abs(g)))
    return out


def conditional_block_moments(model: FiniteLatticeModel, m: int) -> ConditionalMoments:
    """Exact E[S_m | Y_0 = s] and E[S_m^2 | Y_0 = s] for every state.

    Forward recursion over t, carrying per current state the conditional mass
    and the first and second moments of the running sum.
    """
    _require_exact(model)
    if m < 1:
        raise ParamOutOfRange("m must be >= 1")
    p = model.transition
    x = model.x_values
    s = model.n_states
    mass = np.eye(s)
    first = np.zeros((s, s))
    second = np.zeros((s, s))
    for _ in range(m):
        mass_next = mass @ p
        first_next = first @ p + mass_next * x
        second = second @ p + 2.0 * (first @ p) * x + mass_next * x * x
        mass, first = mass_next, first_next
    return ConditionalMoments(m=m, mean_by_state=first.sum(axis=1),
                              second_by_state=second.sum(axis=1))


# ---------------------------------------------------------------------------
# distribution of S_n
# ---------------------------------------------------------------------------

def distribution_of_Sn(model: FiniteLatticeModel, n: int,
                       budget_bytes: int = DEFAULT_BUDGET_BYTES) -> TailTable:
    """Exact law of S_n from a stationary start, by log-space DP convolution
    over (state, lattice sum)."""
    _require_exact(model)
    if n < 1:
        raise ParamOutOfRange("n must be >= 1")
    xnum = model.f_num.astype(np.int64)
    xmin, xmax = int(xnum.min()), int(xnum.max())
    # the walk starts at 0 and after t steps lives in [t*xmin, t*xmax]
    k_lo, k_hi = min(0, n * xmin), max(0, n * xmax)
    width = k_hi - k_lo + 1
    s = model.n_states
    need = 2 * s * width * 8
    if need > budget_bytes:
        raise BudgetExceeded(
            f"DP table needs {need} bytes ({s} states x {width} lattice points "
            f"x 2 buffers) against a budget of {budget_bytes}")

    with np.errstate(divide="ignore"):
        log_t = np.log(model.transition)
        log_pi = np.log(model.pi)

    # index i holds lattice numerator k = k_lo + i
    logp = np.full((s, width), -np.inf)
    zero_idx = -k_lo
    logp[:, zero_idx] = log_pi
    cur = logp
    nxt = np.full((s, width), -np.inf)
    lo = hi = zero_idx  # live index window [lo, hi]
    for t in range(1, n + 1):
        nxt[:, :] = -np.inf
        new_lo, new_hi = lo + xmin, hi + xmax
        window = slice(lo, hi + 1)
        for sp in range(s):
            acc = np.logaddexp.reduce(cur[:, window] + log_t[:, sp][:, None], axis=0)
            d = int(xnum[sp])
            nxt[sp, lo + d:hi + d + 1] = acc
        cur, nxt = nxt, cur
        lo, hi = new_lo, new_hi

    marg = np.logaddexp.reduce(cur, axis=0)
    finite = marg > -np.inf
    offsets = (np.arange(width, dtype=np.int64) + k_lo)[finite]
    logp_out = marg[finite]
    total = float(np.logaddexp.reduce(logp_out))
    if abs(total) > MASS_TOL:
        raise MdlabError(f"DP mass check failed: log total mass {total!r}")
    return TailTable(n=n, denom=model.denom, offsets=offsets,
                     logp=logp_out, sigma_n=sigma_n(model, n),
                     center=float(n * model.mean_fraction))


# ---------------------------------------------------------------------------
# tail, quantile, Kolmogorov distance
# ---------------------------------------------------------------------------

def exact_tail(table: TailTable, x) -> np.ndarray | float:
    """log P(W_n >= x sigma_n), inclusive at atoms; -inf beyond the support."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    suffix = _suffix_logsum(table.logp)
    thr = (xs * table.sigma_n * np.sqrt(table.n) + table.center) * table.denom
    idx = np.searchsorted(table.offsets, thr, side="left")
    out = np.where(idx < table.offsets.size,
                   suffix[np.minimum(idx, table.offsets.size - 1)], -np.inf)
    return out if np.ndim(x) else float(out[0])


def exact_lower_tail(table: TailTable, x) -> np.ndarray | float:
    """log P(W_n <= -x sigma_n), inclusive at atoms (mirror of exact_tail)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    prefix = _prefix_logsum(table.logp)
    thr = (table.center - xs * table.sigma_n * np.sqrt(table.n)) * table.denom
    idx = np.searchsorted(table.offsets, thr, side="right") - 1
    out = np.where(idx >= 0, prefix[np.maximum(idx, 0)], -np.inf)
    return out if np.ndim(x) else float(out[0])


def _suffix_logsum(logp: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(logp[::-1])[::-1]


def _prefix_logsum(logp: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(logp)


def quantile(table: TailTable, s) -> np.ndarray | float:
    """Left-continuous generalized inverse of the CDF of W_n / sigma_n."""
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((ss <= 0.0) | (ss >= 1.0)):
        raise OutOfRange("quantile argument must lie strictly inside (0, 1)")
    cdf = table.cdf_points()
    idx = np.searchsorted(cdf, ss, side="left")
    out = table.what_values[np.minimum(idx, cdf.size - 1)]
    return out if np.ndim(s) else float(out[0])


def ks_distance_exact(table: TailTable) -> float:
    """sup_x |P(W_n <= x sigma_n) - Phi(x)|, evaluating both sides of every atom."""
    cdf = table.cdf_points()
    phi = normal_cdf(table.what_values)
    left = np.concatenate(([0.0], cdf[:-1]))
    return float(max(np.max(np.abs(cdf - phi)), np.max(np.abs(left - phi))))
