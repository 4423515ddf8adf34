"""Stationary bounded process models.

Two tiers are supported.  The exact tier is a finite-state Markov chain with a
rational lattice payoff: everything downstream (sum distributions, conditional
moments, mixing coefficients) can then be computed exactly.  The sampled tier
is a seeded trajectory generator carrying an analytic decay certificate; it is
only accessible through simulation.

Construction is deliberately pedantic: transition rows are renormalized in
exact rational arithmetic, the stationary vector is solved exactly for small
chains, and the payoff is centered on the lattice so that the stationary mean
of the centered payoff is an exact zero, not a float residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegeneratePayoff,
    NonStochasticRow,
    ParamOutOfRange,
    PeriodicChain,
    ReducibleChain,
    SampledTierUnsupported,
    UnknownBuiltin,
)

ROW_SUM_TOL = 1e-12
STATIONARY_RESIDUAL_TOL = 1e-14
EXACT_SOLVE_MAX_STATES = 64
BURN_IN_TOL = 1e-12


@dataclass(frozen=True)
class DecayCertificate:
    """Analytic upper bounds on the conditional-mean and conditional-cross
    dependence sequences, with an optional geometric envelope for indices
    beyond the stored window.

    ``eta1[k-1]`` bounds the uniform norm of the conditional mean of the
    payoff k steps ahead; ``eta2[k-1]`` bounds the centered conditional cross
    moments from lag k on.  Both sequences must be non-increasing.
    """

    eta1: np.ndarray
    eta2: np.ndarray
    beta: Optional[float] = None
    rate_constant: float = 1.0
    geometric_rho: Optional[float] = None
    beta_is_fit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "eta1", np.asarray(self.eta1, dtype=float))
        object.__setattr__(self, "eta2", np.asarray(self.eta2, dtype=float))
        for name, seq in (("eta1", self.eta1), ("eta2", self.eta2)):
            if seq.size and (not np.all(np.isfinite(seq)) or np.any(seq < 0)):
                raise ParamOutOfRange(f"{name} entries must be finite and >= 0")
            if seq.size and np.any(np.diff(seq) > 1e-15):
                raise ParamOutOfRange(f"{name} must be non-increasing")
        if self.beta is not None and not self.beta > 1:
            raise ParamOutOfRange("decay exponent beta must exceed 1")
        if self.geometric_rho is not None and not 0 < self.geometric_rho < 1:
            raise ParamOutOfRange("geometric_rho must lie in (0, 1)")

    @property
    def beta_effective(self) -> float:
        """Polynomial decay exponent; geometric decay counts as +inf."""
        if self.beta is not None:
            return self.beta
        if self.geometric_rho is not None:
            return math.inf
        raise ParamOutOfRange("certificate declares neither beta nor a geometric rate")

    def _at(self, seq: np.ndarray, k: int) -> float:
        if k < 1:
            raise ParamOutOfRange("certificate index must be >= 1")
        if k <= seq.size:
            return float(seq[k - 1])
        if self.geometric_rho is None:
            raise ParamOutOfRange(
                f"certificate stores {seq.size} entries and no geometric tail; "
                f"index {k} unavailable"
            )
        last = float(seq[-1]) if seq.size else self.rate_constant
        return last * self.geometric_rho ** (k - seq.size)

    def eta1_at(self, k: int) -> float:
        return self._at(self.eta1, k)

    def eta2_at(self, k: int) -> float:
        return self._at(self.eta2, k)


@dataclass(frozen=True)
class Trajectory:
    """One simulated path.

    ``values`` holds the centered payoffs X_1..X_n.  Exact-tier paths also
    carry the visited states Y_0..Y_n; sampled-tier paths may carry the
    innovations that generated them (needed for nested resampling).
    """

    values: np.ndarray
    states: Optional[np.ndarray] = None
    innovations: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class FiniteLatticeModel:
    """Irreducible aperiodic finite-state chain with a lattice payoff.

    The raw payoff of state s is ``f_num[s] / denom``; the centered payoff
    subtracts the stationary mean, which is kept as an exact rational
    (``mean_fraction``), so the centered payoff has stationary mean exactly
    zero in rational arithmetic.  Raw sums stay on the integer lattice
    Z / denom, which is what the distribution DP convolves over.
    """

    states: tuple
    transition: np.ndarray
    f_num: np.ndarray
    denom: int
    pi: np.ndarray
    pi_exact: tuple
    mean_fraction: Fraction
    x_values: np.ndarray
    name: str = "lattice"

    tier = "exact"

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def bound(self) -> float:
        """Uniform norm of the centered payoff."""
        return float(np.max(np.abs(self.x_values)))

    def describe(self) -> dict:
        return {
            "tier": self.tier,
            "name": self.name,
            "states": list(self.states),
            "denom": self.denom,
            "mean": float(self.mean_fraction),
            "bound": self.bound,
        }


@dataclass(frozen=True, eq=False)
class SampledModel:
    """Seeded trajectory generator with an analytic decay certificate.

    ``sampler(seed, n)`` must return a Trajectory of n bounded centered
    values, bit-identical for identical seeds.  ``autocov`` (optional) gives
    the analytic autocovariance, and ``conditional_sampler`` (optional)
    redraws a trajectory forward of a time index while freezing the
    innovations before it.
    """

    name: str
    sampler: Callable[[int, int], Trajectory]
    bound: float
    decay: DecayCertificate
    burn_in: int
    autocov: Optional[Callable[[int], float]] = None
    conditional_sampler: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    tier = "sampled"

    def __post_init__(self):
        if not (np.isfinite(self.bound) and self.bound > 0):
            raise ParamOutOfRange("bound must be finite and positive")
        if self.burn_in < 0:
            raise ParamOutOfRange("burn_in must be >= 0")

    def describe(self) -> dict:
        return {"tier": self.tier, "name": self.name, "bound": self.bound,
                "burn_in": self.burn_in, "params": dict(self.params)}


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]

    def reach(a):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in np.nonzero(a[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return seen

    return bool(reach(adj).all() and reach(adj.T).all())


def _period(adj: np.ndarray) -> int:
    # BFS levels from state 0; the period is the gcd of level[u] + 1 - level[v]
    # over all edges (u, v) of a strongly connected graph.
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.nonzero(adj[u])[0]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    g = 0
    for u in range(n):
        for v in np.nonzero(adj[u])[0]:
            g = math.gcd(g, int(level[u]) + 1 - int(level[v]))
    return abs(g) if g else 1


def _exact_stationary(rows: list[list[Fraction]]) -> list[Fraction]:
    """Solve pi P = pi, sum(pi) = 1 by Gaussian elimination over Fractions."""
    n = len(rows)
    # Build (P^T - I) with the last equation replaced by sum(pi) = 1.
    a = [[rows[j][i] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    b = [Fraction(0)] * n
    a[-1] = [Fraction(1)] * n
    b[-1] = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ReducibleChain("stationary system is singular")
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] *= inv
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
                b[r] -= f * b[col]
    return b


def _power_iteration_stationary(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(200000):
        nxt = pi @ p
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < STATIONARY_RESIDUAL_TOL:
            return nxt
        pi = nxt
    raise ReducibleChain("power iteration for the stationary vector did not converge")


def build_finite_lattice_model(states: Sequence, transition, f_num, denom: int,
                               name: str = "lattice") -> FiniteLatticeModel:
    """Build and validate an exact-tier model.

    Rows within 1e-12 of stochastic are renormalized exactly; anything worse
    raises.  The chain must be irreducible and aperiodic, and the payoff must
    be non-constant under the stationary law.
    """
    trans = np.asarray(transition, dtype=float)
    fn = np.asarray(f_num, dtype=np.int64)
    states = tuple(states)
    n = len(states)
    if trans.shape != (n, n):
        raise NonStochasticRow(f"transition must be {n}x{n}, got {trans.shape}")
    if fn.shape != (n,):
        raise ParamOutOfRange("f_num must have one entry per state")
    if denom < 1:
        raise ParamOutOfRange("denom must be a positive integer")
    if np.any(trans < 0):
        raise NonStochasticRow("transition entries must be nonnegative")
    sums = trans.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
    if bad.size:
        raise NonStochasticRow(f"row {bad[0]} sums to {sums[bad[0]]!r}")

    # exact rational renormalization of each row
    frac_rows = []
    for r in range(n):
        row = [Fraction(float(v)) for v in trans[r]]
        s = sum(row)
        frac_rows.append([v / s for v in row])
    trans = np.array([[float(v) for v in row] for row in frac_rows])

    adj = trans > 0.0
    if not _strongly_connected(adj):
        raise ReducibleChain("transition graph is not strongly connected")
    if _period(adj) != 1:
        raise PeriodicChain(f"chain has period {_period(adj)}")

    if n <= EXACT_SOLVE_MAX_STATES:
        pi_frac = _exact_stationary(frac_rows)
        pi = np.array([float(v) for v in pi_frac])
    else:
        pi = _power_iteration_stationary(trans)
        pi_frac = [Fraction(float(v)) for v in pi]

    if np.any(pi < -1e-15):
        raise ReducibleChain("stationary vector has negative mass")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()

    # center exactly: mu = sum pi f / q as a Fraction, X(s) = f(s)/q - mu
    mean = sum(p * int(v) for p, v in zip(pi_frac, fn)) / denom
    x_exact = [Fraction(int(v), denom) - mean for v in fn]
    if all(v == 0 for v in x_exact):
        raise DegeneratePayoff("payoff is constant under the stationary law")
    x_values = np.array([float(v) for v in x_exact])

    return FiniteLatticeModel(states=states, transition=trans, f_num=fn,
                              denom=int(denom), pi=pi, pi_exact=tuple(pi_frac),
                              mean_fraction=mean, x_values=x_values, name=name)


# ---------------------------------------------------------------------------
# built-in model families
# ---------------------------------------------------------------------------

def _two_state(rho: float, name: str) -> FiniteLatticeModel:
    if not -1.0 < rho < 1.0:
        raise ParamOutOfRange(f"rho must lie in (-1, 1), got {rho}")
    stay = (1.0 + rho) / 2.0
    trans = [[stay, 1.0 - stay], [1.0 - stay, stay]]
    return build_finite_lattice_model(("-1", "+1"), trans, [-1, 1], 1, name=name)


def _dyadic_contracting(L: int) -> FiniteLatticeModel:
    if L < 1:
        raise ParamOutOfRange(f"L must be >= 1, got {L}")
    size = 1 << L
    trans = np.zeros((size, size))
    for j in range(size):
        trans[j, j // 2] += 0.5
        trans[j, j // 2 + size // 2] += 0.5
    return build_finite_lattice_model(
        tuple(f"{j}/{size}" for j in range(size)), trans,
        np.arange(size, dtype=np.int64), size, name=f"dyadic_contracting(L={L})")


def _moving_average(c: float, L_trunc: int) -> SampledModel:
    if not (np.isfinite(c) and c > 0):
        raise ParamOutOfRange(f"c must be positive, got {c}")
    if L_trunc < 1:
        raise ParamOutOfRange(f"L_trunc must be >= 1, got {L_trunc}")
    L = int(L_trunc)
    weights = c * 0.5 ** np.arange(L + 1)
    bound = float(weights.sum())
    rho_geom = 0.5
    burn_in = max(L, math.ceil(math.log(BURN_IN_TOL) / math.log(rho_geom)))

    # conditional-mean tail: sum_{i>=k} c 2^{-i}; cross terms square it
    ks = np.arange(1, L + 1)
    eta1 = c * (2.0 ** (1 - ks) - 2.0 ** (-L))
    eta2 = 2.0 * eta1 ** 2

    def sampler(seed: int, n: int) -> Trajectory:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        eps = rng.integers(0, 2, size=burn_in + n) * 2.0 - 1.0
        x = np.convolve(eps, weights, mode="full")[burn_in:burn_in + n]
        return Trajectory(values=x, innovations=eps)

    def conditional_sampler(traj: Trajectory, start: int, n_out: int, draws: int,
                            rng: np.random.Generator) -> np.ndarray:
        """Redraw X_{start+1}..X_{start+n_out} with innovations through time
        `start` frozen; returns a (draws, n_out) array."""
        frozen = burn_in + start  # eps indices feeding X_1..X_start
        eps = traj.innovations
        out = np.empty((draws, n_out))
        for d in range(draws):
            e = eps.copy()
            e[frozen:] = rng.integers(0, 2, size=e.size - frozen) * 2.0 - 1.0
            out[d] = np.convolve(e, weights, mode="full")[burn_in:e.size][start:start + n_out]
        return out

    def autocov(k: int) -> float:
        if k < 0:
            raise ParamOutOfRange("lag must be >= 0")
        if k > L:
            return 0.0
        i = np.arange(0, L + 1 - k)
        return float(np.sum(weights[i] * weights[i + k]))

    cert = DecayCertificate(eta1=eta1, eta2=eta2, beta=None,
                            rate_constant=2.0 * c, geometric_rho=rho_geom)
    return SampledModel(name=f"moving_average(c={c}, L_trunc={L})", sampler=sampler,
                        bound=bound, decay=cert, burn_in=burn_in, autocov=autocov,
                        conditional_sampler=conditional_sampler,
                        params={"c": c, "L_trunc": L})


def builtin(name: str, **params):
    """Named built-in model families.

    rademacher                i.i.d. +/-1 (exact tier)
    two_state(rho)            symmetric two-state chain, stay prob (1+rho)/2
    dyadic_contracting(L)     binary-shift chain on {j/2^L}, contraction 1/2
    moving_average(c,L_trunc) geometric moving average of i.i.d. signs (sampled)
    """
    known = {"rademacher", "two_state", "dyadic_contracting", "moving_average"}
    if name not in known:
        raise UnknownBuiltin(f"unknown builtin model {name!r}")
    try:
        if name == "rademacher":
            model = _two_state(0.0, name="rademacher")
        elif name == "two_state":
            rho = float(params.pop("rho"))
            model = _two_state(rho, name=f"two_state(rho={rho})")
        elif name == "dyadic_contracting":
            model = _dyadic_contracting(int(params.pop("L")))
        else:
            model = _moving_average(float(params.pop("c")), int(params.pop("L_trunc")))
    except KeyError as exc:
        raise ParamOutOfRange(f"missing parameter {exc} for builtin {name!r}") from None
    if params:
        raise ParamOutOfRange(f"unexpected parameters {sorted(params)} for builtin {name!r}")
    return model


# ---------------------------------------------------------------------------
# model definition files
# ---------------------------------------------------------------------------

def parse_model_text(text: str, name: str = "file") -> FiniteLatticeModel:
    """Parse the key = value model grammar:

        states     = up down          (labels, whitespace separated)
        denom      = 1                (positive integer)
        f_num      = 1 -1             (integer payoff numerators, one per state)
        transition = 0.9 0.1  0.2 0.8 (row-major, |states|^2 numbers)

    Lines starting with '#' are comments.  All four keys are required.
    """
    fields: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParamOutOfRange(f"model file line {lineno}: expected key = values")
        key, _, rest = line.partition("=")
        key = key.strip()
        if key not in ("states", "denom", "f_num", "transition"):
            raise ParamOutOfRange(f"model file line {lineno}: unknown key {key!r}")
        fields.setdefault(key, []).extend(rest.split())
    missing = {"states", "denom", "f_num", "transition"} - fields.keys()
    if missing:
        raise ParamOutOfRange(f"model file is missing keys: {sorted(missing)}")
    states = fields["states"]
    n = len(states)
    try:
        denom = int(fields["denom"][0])
        f_num = [int(v) for v in fields["f_num"]]
        flat = [float(v) for v in fields["transition"]]
    except ValueError as exc:
        raise ParamOutOfRange(f"model file: {exc}") from None
    if len(flat) != n * n:
        raise ParamOutOfRange(
            f"transition needs {n * n} entries for {n} states, got {len(flat)}")
    trans = np.asarray(flat).reshape(n, n)
    return build_finite_lattice_model(states, trans, f_num, denom, name=name)


# ---------------------------------------------------------------------------
# mixing diagnostics
# ---------------------------------------------------------------------------

def phi_mixing_coefficients(model: FiniteLatticeModel, horizon: int) -> np.ndarray:
    """Uniform mixing coefficients phi_1(1..horizon).

    phi_1(n) is the worst total-variation distance between any row of the
    n-step transition matrix and the stationary law; it is non-increasing.
    """
    _require_exact(model)
    if horizon < 1:
        raise ParamOutOfRange("horizon must be >= 1")
    out = np.empty(horizon)
    pk = model.transition.copy()
    for k in range(horizon):
        out[k] = 0.5 * np.max(np.abs(pk - model.pi).sum(axis=1))
        if k + 1 < horizon:
            pk = pk @ model.transition
    return out


def geometric_mixing_certificate(model: FiniteLatticeModel,
                                 max_power: int = 4096) -> tuple[float, float, int]:
    """Certified geometric envelope phi_1(k) <= C * r^k.

    Uses the Dobrushin contraction coefficient of the smallest matrix power
    with coefficient < 1: delta(P^(a+b)) <= delta(P^a) delta(P^b), hence
    phi_1(k) <= delta(P^n0)^(k/n0 - 1).  Returns (C, r, n0).
    """
    _require_exact(model)
    p = model.transition
    n0 = 1
    pk = p.copy()
    while n0 <= max_power:
        d = _dobrushin(pk)
        if d == 0.0:
            # rows of P^n0 are identical: exact independence after n0 steps
            return (1.0, 0.0, n0)
        if d < 1.0 - 1e-12:
            return (1.0 / d, d ** (1.0 / n0), n0)
        pk = pk @ pk
        n0 *= 2
    raise ReducibleChain("no contracting power found; chain mixes too slowly")


def _dobrushin(p: np.ndarray) -> float:
    """Upper bound on the contraction coefficient max_{i,j} TV(P(i,.), P(j,.)).

    Exact pairwise scan for small chains; the Doeblin column-minimum bound
    1 - sum_c min_i P(i, c) (still a certified upper bound) for large ones.
    """
    n = p.shape[0]
    if n <= 64:
        diff = 0.5 * np.abs(p[:, None, :] - p[None, :, :]).sum(axis=2)
        return float(diff.max())
    return float(min(1.0, max(0.0, 1.0 - p.min(axis=0).sum())))


def _require_exact(model) -> None:
    if getattr(model, "tier", None) != "exact":
        raise SampledTierUnsupported(
            f"{getattr(model, 'name', model)!r} is not an exact-tier model")


# ---------------------------------------------------------------------------
# trajectory simulation
# ---------------------------------------------------------------------------

CHAIN_CHUNK = 4096


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic child generator for work unit `index` of a master seed."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def sample_trajectory(model, n: int, seed: int) -> Trajectory:
    """One stationary trajectory of length n, deterministic per seed."""
    if n < 1:
        raise ParamOutOfRange("n must be >= 1")
    if model.tier == "sampled":
        return model.sampler(seed, n)
    rng = child_rng(seed, 0)
    states = _simulate_states(model, n, 1, rng)[0]
    return Trajectory(values=model.x_values[states[1:]], states=states)


def sample_state_paths(model: FiniteLatticeModel, n: int, chains: int,
                       seed: int) -> np.ndarray:
    """State paths Y_0..Y_n for `chains` independent stationary trajectories.

    Chains are generated in fixed-size blocks with child seeds derived from
    (seed, block index), so any parallel schedule that preserves block order
    reproduces the sequential output bit for bit.
    """
    _require_exact(model)
    out = np.empty((chains, n + 1), dtype=np.int64)
    for block, lo in enumerate(range(0, chains, CHAIN_CHUNK)):
        hi = min(lo + CHAIN_CHUNK, chains)
        out[lo:hi] = _simulate_states(model, n, hi - lo, child_rng(seed, block))
    return out


def _simulate_states(model: FiniteLatticeModel, n: int, chains: int,
                     rng: np.random.Generator) -> np.ndarray:
    cum_pi = np.cumsum(model.pi)
    cum_rows = np.cumsum(model.transition, axis=1)
    cum_pi[-1] = cum_rows[:, -1] = 1.0
    paths = np.empty((chains, n + 1), dtype=np.int64)
    paths[:, 0] = np.searchsorted(cum_pi, rng.random(chains), side="left")
    for t in range(1, n + 1):
        u = rng.random(chains)
        rows = cum_rows[paths[:, t - 1]]
        paths[:, t] = (rows < u[:, None]).sum(axis=1)
    return paths
