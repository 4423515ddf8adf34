"""Deterministic evaluators for the explicit deviation inequalities.

Two kinds of object live here.  Shape envelopes (the Cramér log-ratio
envelope, its martingale specialization, the Berry-Esseen combination) carry
an unknown absolute constant; they are evaluated with caller-supplied
constants, default 1, and are reporting tools, not assertions.  Fully
explicit bounds (the Bernstein-type tail bound, Freedman, the maximal
inequality, the Gaussian tail sandwich) have no free constants and must
dominate the exact probabilities wherever their preconditions hold; the test
suite enforces that as hard assertions.

Convention: t |ln t| extends continuously to 0 at t = 0, which is exactly the
martingale case of a vanishing drift coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet, GateReport, admissibility
from .errors import GammaTooLarge, MissingNorms, NegativeX, ParamOutOfRange

SQRT_E4 = 4.0 * math.sqrt(math.e)


def xlnx(t) -> np.ndarray | float:
    """t |ln t| with the continuous extension 0 at t = 0."""
    ts = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ts > 0.0, ts * np.abs(np.log(np.where(ts > 0, ts, 1.0))), 0.0)
    return out if np.ndim(t) else float(out)


@dataclass(frozen=True)
class BoundCurve:
    """An evaluated inequality on an x grid, with per-point validity flags
    recording whether the bound's stated preconditions hold there."""

    kind: str
    x_grid: np.ndarray
    value: np.ndarray
    valid: np.ndarray
    gate_mode: str
    constants: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["x,value,valid"]
        lines += [f"{x:.17g},{v:.17g},{int(ok)}"
                  for x, v, ok in zip(self.x_grid, self.value, self.valid)]
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {"schema": "bound_curve/1", "kind": self.kind,
                "gate_mode": self.gate_mode, "constants": dict(self.constants),
                "x": [float(v) for v in self.x_grid],
                "value": [float(v) for v in self.value],
                "valid": [bool(v) for v in self.valid]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


# ---------------------------------------------------------------------------
# Cramér-type envelopes (shape mode: constant supplied by caller)
# ---------------------------------------------------------------------------

def cramer_envelope(coeffs: CoefficientSet, x, c: float = 1.0):
    """Envelope for |ln of the tail ratio| of the stationary sum:

        c ( x^3 eps + x^2 (delta^2 + m/n + g) + (1+x)(eps|ln eps| + g + delta
            + sqrt(m/n)) ),   g = gamma |ln gamma|.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeX("envelope is defined for x >= 0")
    if c <= 0:
        raise ParamOutOfRange("envelope constant must be positive")
    g = xlnx(coeffs.gamma_m)
    mn = coeffs.m / coeffs.n
    quad = coeffs.delta_sq + mn + g
    lin = xlnx(coeffs.eps_m) + g + coeffs.delta_m + math.sqrt(mn)
    out = c * (xs ** 3 * coeffs.eps_m + xs ** 2 * quad + (1.0 + xs) * lin)
    return out if np.ndim(x) else float(out)


def envelope_curve(coeffs: CoefficientSet, x_grid, c: float = 1.0,
                   gate_mode: str = "practical") -> BoundCurve:
    """Cramér envelope on a grid, flagged valid where the admissibility gates
    hold and x stays inside the admissible range."""
    xs = np.asarray(x_grid, dtype=float)
    gates: GateReport = admissibility(coeffs, gate_mode)
    valid = (xs >= 0) & (xs <= gates.x_max) & gates.all_ok
    return BoundCurve(kind="cramer_envelope", x_grid=xs,
                      value=np.asarray(cramer_envelope(coeffs, xs, c)),
                      valid=valid, gate_mode=gate_mode,
                      constants={"C": c})


def martingale_cramer_envelope(eps: float, iota: float, x, c: float = 1.0):
    """Martingale log-ratio envelope
    c ( x^3 eps + x^2 iota^2 + (1+x)(eps|ln eps| + iota) )."""
    if not 0.0 < eps <= 0.5:
        raise ParamOutOfRange(f"eps must lie in (0, 1/2], got {eps}")
    if not 0.0 <= iota <= 0.5:
        raise ParamOutOfRange(f"iota must lie in [0, 1/2], got {iota}")
    if c <= 0:
        raise ParamOutOfRange("envelope constant must be positive")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeX("envelope is defined for x >= 0")
    out = c * (xs ** 3 * eps + xs ** 2 * iota ** 2 + (1.0 + xs) * (xlnx(eps) + iota))
    return out if np.ndim(x) else float(out)


def berry_esseen_bound(coeffs: CoefficientSet, c: float = 1.0) -> float:
    """Uniform normal-approximation bound
    c (gamma|ln gamma| + eps|ln eps| + delta + sqrt(m/n))."""
    if c <= 0:
        raise ParamOutOfRange("constant must be positive")
    return c * (xlnx(coeffs.gamma_m) + xlnx(coeffs.eps_m) + coeffs.delta_m
                + math.sqrt(coeffs.m / coeffs.n))


def varsigma(coeffs: CoefficientSet) -> float:
    """The combined small parameter gamma|ln gamma| + eps|ln eps| + delta
    + sqrt(m/n) used by the Berry-Esseen bound and the coupling gap."""
    return berry_esseen_bound(coeffs, 1.0)


# ---------------------------------------------------------------------------
# fully explicit bounds (no free constants; assertable)
# ---------------------------------------------------------------------------

def bernstein_bound(coeffs: CoefficientSet, x):
    """Two-term Bernstein-type tail bound on P(W_n >= x sigma_n):

        exp{ -(1-g)^2 x^2 / (2 (1 + tau^2 + (2/3) eps (1-g) x)) }
        + 4 sqrt(e) exp{ -(ln gamma)^2 x^2 / (2 * 81^2) },   g = gamma|ln gamma|.

    The second term vanishes in the martingale limit gamma = 0.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise NegativeX("the Bernstein bound is stated for x > 0")
    g = xlnx(coeffs.gamma_m)
    if g >= 1.0:
        raise GammaTooLarge(f"gamma|ln gamma| = {g} >= 1; the bound degenerates")
    first = np.exp(-(1.0 - g) ** 2 * xs ** 2
                   / (2.0 * (1.0 + coeffs.tau_sq
                             + (2.0 / 3.0) * coeffs.eps_m * (1.0 - g) * xs)))
    if coeffs.gamma_m == 0.0:
        second = np.zeros_like(xs)
    else:
        second = SQRT_E4 * np.exp(-(math.log(coeffs.gamma_m)) ** 2 * xs ** 2
                                  / (2.0 * 81.0 ** 2))
    out = first + second
    return out if np.ndim(x) else float(out)


def freedman_bound(x, v2: float, a: float):
    """exp{-x^2 / (2 (v^2 + a x / 3))}: bounds the probability that a
    martingale with differences <= a reaches x while its quadratic
    characteristic stays below v^2."""
    if v2 <= 0:
        raise ParamOutOfRange("v2 must be positive")
    if a < 0:
        raise ParamOutOfRange("a must be >= 0")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeX("x must be >= 0")
    out = np.exp(-xs ** 2 / (2.0 * (v2 + a * xs / 3.0)))
    return out if np.ndim(x) else float(out)


def peligrad_bound(x, n: int, bound_x1: float, cond_norms):
    """Maximal inequality for the running sums of an adapted stationary
    sequence:

        P(max_{i<=n} |S_i| >= x)
          <= 4 sqrt(e) exp{ -x^2 / (2 n (||X_1|| + 80 sum_j j^{-3/2} nu_j)^2) }

    where nu_j = ||E[S_j | F_0]||_inf for j = 1..n.
    """
    norms = np.asarray(cond_norms, dtype=float)
    if norms.size < n:
        raise MissingNorms(f"need conditional-sum norms for j = 1..{n}, got {norms.size}")
    if np.any(norms[:n] < 0):
        raise MissingNorms("conditional-sum norms must be >= 0")
    if bound_x1 <= 0 or n < 1:
        raise ParamOutOfRange("need bound_x1 > 0 and n >= 1")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeX("x must be >= 0")
    js = np.arange(1, n + 1, dtype=float)
    denom = bound_x1 + 80.0 * float(np.sum(js ** -1.5 * norms[:n]))
    out = SQRT_E4 * np.exp(-xs ** 2 / (2.0 * n * denom ** 2))
    return out if np.ndim(x) else float(out)


def gaussian_tail_sandwich(x):
    """Two-sided bound on the standard normal tail:

        e^{-x^2/2} / (sqrt(2 pi) (1+x)) <= 1 - Phi(x) <= e^{-x^2/2} / (sqrt(pi) (1+x)).
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeX("the sandwich is stated for x >= 0")
    core = np.exp(-xs ** 2 / 2.0) / (1.0 + xs)
    lower = core / math.sqrt(2.0 * math.pi)
    upper = core / math.sqrt(math.pi)
    if np.ndim(x):
        return lower, upper
    return float(lower), float(upper)


def uniform_x_range(coeffs: CoefficientSet) -> float:
    """Scale of the x range over which the tail ratio is claimed to approach 1:
    min{ eps^{-1/3}, delta^{-1}, (n/m)^{1/2}, (gamma|ln gamma|)^{-1/2} },
    with vanishing coefficients contributing +inf."""
    g = xlnx(coeffs.gamma_m)
    scales = [
        coeffs.eps_m ** (-1.0 / 3.0) if coeffs.eps_m > 0 else math.inf,
        1.0 / coeffs.delta_m if coeffs.delta_m > 0 else math.inf,
        math.sqrt(coeffs.n / coeffs.m),
        g ** -0.5 if g > 0 else math.inf,
    ]
    return float(min(scales))
