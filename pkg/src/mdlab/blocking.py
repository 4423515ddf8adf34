"""Block decomposition of a trajectory into martingale differences.

A horizon n is cut into k = floor(n/m) blocks of length m plus a remainder.
Each block sum is recentered by its predictable part, the conditional
expectation given everything up to the block start, which for a Markov chain
is a function of the state observed there.  The recentered blocks are bounded
martingale differences; their normalized quadratic characteristic stays
within delta^2 + m/n of one.

Two variants are provided: the remainder block can be carried additively
("split_remainder") or recentered like the others ("martingale_all").
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    NestedEstimateUnavailable,
    ParamOutOfRange,
    TrajectoryTooShort,
)
from .exact import conditional_block_moments, sigma_any
from .models import FiniteLatticeModel, Trajectory, _require_exact, child_rng

VARIANTS = ("split_remainder", "martingale_all")
NESTED_DRAWS_DEFAULT = 256


@dataclass(frozen=True)
class BlockDecomposition:
    """Blocks, predictable parts and martingale differences for one path.

    block_sums has k+1 entries (the last is the remainder, possibly zero);
    predictable/diffs/xi cover the martingalized blocks only (k of them for
    split_remainder, k+1 for martingale_all).  quad_char is the running
    normalized quadratic characteristic of the martingale.
    """

    n: int
    m: int
    k: int
    variant: str
    sigma_n: float
    block_sums: np.ndarray
    predictable: np.ndarray
    diffs: np.ndarray
    xi: np.ndarray
    martingale_path: np.ndarray
    quad_char: np.ndarray
    predictable_se: Optional[np.ndarray] = None

    @property
    def quad_char_total(self) -> float:
        return float(self.quad_char[-1]) if self.quad_char.size else 0.0

    def to_csv(self) -> str:
        lines = ["i,block_sum,predictable,martingale_diff"]
        for i, s in enumerate(self.block_sums, start=1):
            if i <= self.diffs.size:
                lines.append(f"{i},{s:.17g},{self.predictable[i - 1]:.17g},"
                             f"{self.diffs[i - 1]:.17g}")
            else:
                lines.append(f"{i},{s:.17g},,")
        return "\n".join(lines) + "\n"


def decompose(model, trajectory: Trajectory, m: int,
              variant: str = "split_remainder",
              nested_draws: int = NESTED_DRAWS_DEFAULT,
              seed: int = 0) -> BlockDecomposition:
    """Decompose one trajectory into block martingale differences.

    Exact-tier predictable parts are exact conditional block moments at the
    observed block-start states.  Sampled-tier predictable parts are nested
    resampling estimates (the conditional sampler redraws each block with the
    past frozen); their standard errors are reported.
    """
    if variant not in VARIANTS:
        raise ParamOutOfRange(f"variant must be one of {VARIANTS}, got {variant!r}")
    if m < 1:
        raise ParamOutOfRange("m must be >= 1")
    n = trajectory.n
    if n < m:
        raise TrajectoryTooShort(f"trajectory has n={n} < m={m}")
    k = n // m
    rem = n - k * m
    sig = sigma_any(model, n)

    values = trajectory.values
    block_sums = np.empty(k + 1)
    for i in range(k):
        block_sums[i] = values[i * m:(i + 1) * m].sum()
    block_sums[k] = values[k * m:].sum() if rem else 0.0

    n_mart = k + 1 if variant == "martingale_all" else k
    if model.tier == "exact":
        predictable, cond_var = _exact_predictable(model, trajectory, m, rem, k, n_mart)
        predictable_se = None
    else:
        predictable, cond_var, predictable_se = _nested_predictable(
            model, trajectory, m, rem, k, n_mart, nested_draws, seed)

    diffs = block_sums[:n_mart] - predictable
    scale = math.sqrt(n) * sig
    xi = diffs / scale
    path = np.cumsum(xi)
    quad = np.cumsum(cond_var) / scale ** 2
    return BlockDecomposition(n=n, m=m, k=k, variant=variant, sigma_n=sig,
                              block_sums=block_sums, predictable=predictable,
                              diffs=diffs, xi=xi, martingale_path=path,
                              quad_char=quad, predictable_se=predictable_se)


def _exact_predictable(model: FiniteLatticeModel, trajectory: Trajectory,
                       m: int, rem: int, k: int, n_mart: int):
    if trajectory.states is None:
        raise TrajectoryTooShort("exact-tier decomposition needs the state path")
    cm = conditional_block_moments(model, m)
    var_m = cm.second_by_state - cm.mean_by_state ** 2
    starts = trajectory.states[[i * m for i in range(k)]]
    predictable = cm.mean_by_state[starts]
    cond_var = var_m[starts]
    if n_mart == k + 1:
        if rem:
            cr = conditional_block_moments(model, rem)
            s_last = trajectory.states[k * m]
            predictable = np.append(predictable, cr.mean_by_state[s_last])
            cond_var = np.append(cond_var,
                                 cr.second_by_state[s_last] - cr.mean_by_state[s_last] ** 2)
        else:
            predictable = np.append(predictable, 0.0)
            cond_var = np.append(cond_var, 0.0)
    return predictable, cond_var


def _nested_predictable(model, trajectory: Trajectory, m: int, rem: int,
                        k: int, n_mart: int, draws: int, seed: int):
    if model.conditional_sampler is None:
        raise NestedEstimateUnavailable(
            f"{model.name!r} exposes no conditional sampler")
    if trajectory.innovations is None:
        raise NestedEstimateUnavailable("trajectory carries no innovations")
    predictable = np.zeros(n_mart)
    cond_var = np.zeros(n_mart)
    se = np.zeros(n_mart)
    for i in range(n_mart):
        length = m if i < k else rem
        if length == 0:
            continue
        rng = child_rng(seed, i)
        reps = model.conditional_sampler(trajectory, i * m, length, draws, rng)
        sums = reps.sum(axis=1)
        predictable[i] = sums.mean()
        cond_var[i] = sums.var(ddof=1)
        se[i] = math.sqrt(cond_var[i] / draws)
    return predictable, cond_var, se


@dataclass(frozen=True)
class QuadCharDeviation:
    """Worst-case deviation of the normalized quadratic characteristic from 1,
    next to the analytic bound it must respect."""

    exact_value: float
    bound_value: float
    variant: str


def quadratic_characteristic_deviation(model: FiniteLatticeModel, n: int, m: int,
                                       variant: str = "split_remainder") -> QuadCharDeviation:
    """Exact sup over block-start state assignments of |<M> - 1| together with
    the bound delta^2 + m/n (split_remainder) or tau^2 (martingale_all)."""
    _require_exact(model)
    if variant not in VARIANTS:
        raise ParamOutOfRange(f"variant must be one of {VARIANTS}, got {variant!r}")
    if not 1 <= m <= n:
        raise ParamOutOfRange(f"need 1 <= m <= n, got m={m}, n={n}")
    from .coefficients import coefficient_set

    k = n // m
    rem = n - k * m
    sig = sigma_any(model, n)
    cm = conditional_block_moments(model, m)
    v = cm.second_by_state - cm.mean_by_state ** 2
    hi = k * float(v.max())
    lo = k * float(v.min())
    if variant == "martingale_all" and rem:
        cr = conditional_block_moments(model, rem)
        vr = cr.second_by_state - cr.mean_by_state ** 2
        hi += float(vr.max())
        lo += float(vr.min())
    scale = n * sig ** 2
    exact_value = max(abs(hi / scale - 1.0), abs(lo / scale - 1.0))

    coeffs = coefficient_set(model, n, m)
    bound = coeffs.delta_sq + m / n
    if variant == "martingale_all":
        bound = coeffs.tau_sq
    return QuadCharDeviation(exact_value=exact_value, bound_value=bound,
                             variant=variant)
