"""Quantile coupling of the normalized sum with a standard normal.

The construction is the classical one: push a standard normal Z through the
composition of Phi with the generalized inverse of the target CDF.  The
output Y then has exactly the target law and is a monotone function of Z, and
the theory predicts that the gap |Y - Z| is quadratically enveloped inside an
admissible region and that the normalized gap has an exponential tail.

Only the functional form of those statements is falsifiable at desk scale
(the absolute constants are existential), so the report checks shapes with
configurable constants and fits the exponential slope for the record.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import coefficient_set
from .bounds import varsigma
from .errors import DegenerateGap, ParamOutOfRange, TooFewSamples
from .exact import TailTable, distribution_of_Sn
from .models import child_rng
from .normal import normal_cdf, normal_quantile

DRAW_CHUNK = 1 << 16
MIN_EMPIRICAL_SAMPLES = 1000


class QuantileTransform:
    """Left-continuous generalized inverse s -> inf{x : F(x) >= s} of a
    discrete CDF, callable on arrays of s in (0, 1)."""

    def __init__(self, atoms: np.ndarray, cum: np.ndarray):
        self.atoms = np.asarray(atoms, dtype=float)
        self.cum = np.asarray(cum, dtype=float)

    def __call__(self, s):
        ss = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.cum, ss, side="left")
        out = self.atoms[np.minimum(idx, self.atoms.size - 1)]
        return out if np.ndim(s) else float(out)


def build_quantile_transform(source) -> QuantileTransform:
    """Quantile transform of the normalized sum W_n / sigma_n.

    Accepts an exact TailTable or a sample array (at least 1000 draws, which
    become the empirical CDF).
    """
    if isinstance(source, TailTable):
        return QuantileTransform(source.what_values, source.cdf_points())
    samples = np.sort(np.asarray(source, dtype=float))
    if samples.size < MIN_EMPIRICAL_SAMPLES:
        raise TooFewSamples(
            f"empirical transform needs >= {MIN_EMPIRICAL_SAMPLES} samples, "
            f"got {samples.size}")
    cum = np.arange(1, samples.size + 1) / samples.size
    return QuantileTransform(samples, cum)


def induced_atom_probabilities(transform: QuantileTransform) -> np.ndarray:
    """Analytic law of Y = H(Phi(Z)): the mass sent to each atom is the normal
    measure of its quantile interval, Phi(z_k) - Phi(z_{k-1}) at the
    breakpoints z_k = Phi^{-1}(cum_k).  No sampling involved."""
    z = normal_quantile(np.clip(transform.cum, 0.0, 1.0))
    phi = np.where(np.isposinf(z), 1.0, normal_cdf(z))
    return np.diff(phi, prepend=0.0)


def sample_coupled_pairs(transform: QuantileTransform, draws: int,
                         seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Coupled pairs (Y, Z): Z i.i.d. standard normal, Y = H(Phi(Z)).

    Y carries exactly the transform's law and is non-decreasing in Z.
    Generation is chunked with child seeds in fixed order, so it is
    reproducible and schedule-independent.
    """
    if draws < 1:
        raise ParamOutOfRange("draws must be >= 1")
    z = np.empty(draws)
    for block, lo in enumerate(range(0, draws, DRAW_CHUNK)):
        hi = min(lo + DRAW_CHUNK, draws)
        z[lo:hi] = child_rng(seed, block).standard_normal(hi - lo)
    y = transform(normal_cdf(z))
    return y, z


@dataclass(frozen=True)
class CouplingReport:
    """Shape checks for the coupling: the quadratic gap envelope inside the
    admissible region, and the exponential-tail fit of the normalized gap."""

    n: int
    m: int
    draws: int
    seed: int
    varsigma_n: float
    alpha: float
    c_alpha: float
    admissible_count: int
    violation_fraction: float
    gap_median: float
    lambda_hat: float
    lambda_se: float
    survival_x: np.ndarray
    survival_logp: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "schema": "coupling_report/1",
            "n": self.n, "m": self.m, "draws": self.draws, "seed": self.seed,
            "varsigma_n": self.varsigma_n,
            "alpha": self.alpha, "c_alpha": self.c_alpha,
            "admissible_count": self.admissible_count,
            "violation_fraction": self.violation_fraction,
            "gap_median": self.gap_median,
            "lambda_hat": self.lambda_hat, "lambda_se": self.lambda_se,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def coupling_report(model, n: int, m: int, draws: int, seed: int,
                    alpha: float = 1.0, c_alpha: float = 1.0) -> CouplingReport:
    """Run the coupling construction for an exact-tier model and measure the
    gap statistics against the predicted shapes.

    The quadratic envelope |Y - Z| <= 2 c_alpha (Y^2 + 1) varsigma is checked
    on draws inside |Y| <= alpha / varsigma; the exponential slope of the
    normalized gap's log-survival is fitted on its upper decile.
    """
    if alpha <= 0 or c_alpha <= 0:
        raise ParamOutOfRange("alpha and c_alpha must be positive")
    coeffs = coefficient_set(model, n, m)
    vs = varsigma(coeffs)
    if not (np.isfinite(vs) and vs > 1e-300):
        raise DegenerateGap(f"varsigma underflows: {vs!r}")
    table = distribution_of_Sn(model, n)
    transform = build_quantile_transform(table)
    y, z = sample_coupled_pairs(transform, draws, seed)

    gap = np.abs(y - z)
    admissible = np.abs(y) <= alpha / vs
    envelope = 2.0 * c_alpha * (y * y + 1.0) * vs
    n_adm = int(admissible.sum())
    violations = int(np.sum(gap[admissible] > envelope[admissible]))
    frac = violations / n_adm if n_adm else 0.0

    g = np.sort(gap / vs)
    lam, se, sx, slog = _fit_survival_slope(g)
    return CouplingReport(n=n, m=m, draws=draws, seed=seed, varsigma_n=vs,
                          alpha=alpha, c_alpha=c_alpha, admissible_count=n_adm,
                          violation_fraction=frac,
                          gap_median=float(np.median(g)),
                          lambda_hat=lam, lambda_se=se,
                          survival_x=sx, survival_logp=slog)


def _fit_survival_slope(sorted_g: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Least-squares slope of ln P(G >= g) against g over the upper decile
    of the sorted normalized gaps (the survival's final point is dropped:
    its log is -inf)."""
    n = sorted_g.size
    start = int(0.9 * n)
    xs = sorted_g[start:n - 1]
    logs = np.log(1.0 - np.arange(start, n - 1) / n)
    if xs.size < 8 or np.ptp(xs) == 0.0:
        raise TooFewSamples("not enough distinct upper-decile gaps for a slope fit")
    a = np.vstack([xs, np.ones_like(xs)]).T
    coef, _, _, _ = np.linalg.lstsq(a, logs, rcond=None)
    resid = logs - a @ coef
    dof = xs.size - 2
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((xs - xs.mean()) ** 2)))
    return float(coef[0]), se, xs, logs
