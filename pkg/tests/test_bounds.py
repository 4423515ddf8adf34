import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlab import (
    CoefficientSet,
    bernstein_bound,
    berry_esseen_bound,
    builtin,
    coefficient_set,
    cramer_envelope,
    distribution_of_Sn,
    envelope_curve,
    exact_tail,
    freedman_bound,
    gaussian_tail_sandwich,
    martingale_cramer_envelope,
    peligrad_bound,
    sample_state_paths,
    uniform_x_range,
    wilson_interval,
)
from mdlab.bounds import xlnx
from mdlab.errors import GammaTooLarge, MissingNorms, NegativeX, ParamOutOfRange
from mdlab.exact import conditional_sum_norms
from mdlab.normal import normal_sf

import oracles


def _coeffs(n=400, m=5, eps=None, gamma=0.0, delta_sq=0.0, sigma=1.0):
    eps = eps if eps is not None else m / math.sqrt(n)
    tau = delta_sq + m / n + 4 * eps ** 2
    return CoefficientSet(n=n, m=m, eps_m=eps, gamma_m=gamma, delta_sq=delta_sq,
                          tau_sq=tau, sigma_n=sigma, gamma_truncation_error=0.0)


# -- scalar formula checks (re-evaluated inline as the oracle) -------------------

def test_cramer_envelope_displayed_polynomial():
    cs = _coeffs()
    x = 1.0
    expected = (x ** 3 * 0.25 + x ** 2 * (5 / 400)
                + (1 + x) * (0.25 * abs(math.log(0.25)) + math.sqrt(5 / 400)))
    assert cramer_envelope(cs, x) == pytest.approx(expected, abs=1e-15)
    assert cramer_envelope(cs, x) == pytest.approx(1.1792539783099243, abs=1e-12)


def test_cramer_envelope_at_zero_keeps_linear_block():
    cs = _coeffs(gamma=0.01, delta_sq=0.04)
    expected = (xlnx(0.01) + xlnx(0.25) + 0.2 + math.sqrt(5 / 400))
    assert cramer_envelope(cs, 0.0) == pytest.approx(expected, abs=1e-15)


def test_martingale_envelope_displayed_polynomial():
    x, eps, iota = 2.0, 0.1, 0.05
    expected = (x ** 3 * eps + x ** 2 * iota ** 2
                + (1 + x) * (eps * abs(math.log(eps)) + iota))
    got = martingale_cramer_envelope(eps, iota, x)
    assert got == pytest.approx(expected, abs=1e-15)
    assert got == pytest.approx(1.6507755278982137, abs=1e-12)


def test_martingale_envelope_iota_zero_monotone():
    xs = np.linspace(0, 4, 50)
    vals = martingale_cramer_envelope(0.2, 0.0, xs)
    assert np.all(np.diff(vals) > 0)


def test_berry_esseen_scalar():
    cs = _coeffs(n=1000, m=10)
    eps = 10 / math.sqrt(1000)
    expected = eps * abs(math.log(eps)) + math.sqrt(10 / 1000)
    assert berry_esseen_bound(cs) == pytest.approx(expected, abs=1e-15)
    assert berry_esseen_bound(cs) == pytest.approx(0.46407067001059, abs=1e-10)


def test_berry_esseen_vanishes_with_coefficients():
    cs = _coeffs(n=10 ** 8, m=2)
    assert berry_esseen_bound(cs) < 0.01


def test_bernstein_scalar_and_small_x_cap():
    cs = CoefficientSet(n=100, m=1, eps_m=0.1, gamma_m=0.0, delta_sq=0.0,
                        tau_sq=0.0, sigma_n=1.0, gamma_truncation_error=0.0)
    expected = math.exp(-1.0 / (2.0 * (1.0 + (2.0 / 3.0) * 0.1)))
    assert bernstein_bound(cs, 1.0) == pytest.approx(expected, abs=1e-15)
    assert bernstein_bound(cs, 1.0) == pytest.approx(0.6257840096045911, abs=1e-12)
    # with a positive drift coefficient both exponents vanish as x -> 0+
    assert bernstein_bound(_coeffs(gamma=0.1), 1e-9) == pytest.approx(
        1.0 + 4.0 * math.sqrt(math.e), abs=1e-6)


def test_bernstein_martingale_limit_drops_second_term():
    with_gamma = _coeffs(gamma=1e-6)
    without = _coeffs(gamma=0.0)
    x = 2.0
    assert bernstein_bound(without, x) < bernstein_bound(with_gamma, x)
    # the gamma = 0 value is the pure Freedman-type first term
    first = math.exp(-4.0 / (2.0 * (1.0 + without.tau_sq
                                    + (2.0 / 3.0) * without.eps_m * 2.0)))
    assert bernstein_bound(without, x) == pytest.approx(first, abs=1e-15)


def test_freedman_scalars():
    assert freedman_bound(0.0, 1.0, 0.5) == 1.0
    assert freedman_bound(2.0, 1.0, 0.0) == pytest.approx(math.exp(-2.0), abs=1e-15)
    assert freedman_bound(1.0, 1.0, 0.1) == pytest.approx(
        math.exp(-1.0 / (2.0 * (1.0 + 0.1 / 3.0))), abs=1e-15)


def test_peligrad_scalars():
    assert peligrad_bound(0.0, 1, 1.0, [0.0]) == pytest.approx(
        4.0 * math.sqrt(math.e), abs=1e-12)
    assert peligrad_bound(2.0, 1, 1.0, [0.0]) == pytest.approx(
        4.0 * math.sqrt(math.e) * math.exp(-2.0), abs=1e-12)


def test_sandwich_constants():
    lo, hi = gaussian_tail_sandwich(0.0)
    assert lo == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-15)
    assert hi == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-15)
    lo1, hi1 = gaussian_tail_sandwich(1.0)
    assert lo1 == pytest.approx(math.exp(-0.5) / (math.sqrt(2 * math.pi) * 2), abs=1e-15)
    assert hi1 == pytest.approx(math.exp(-0.5) / (math.sqrt(math.pi) * 2), abs=1e-15)
    assert lo1 < float(normal_sf(1.0)) < hi1


def test_uniform_x_range_scalars():
    cs = _coeffs()  # rademacher shape: gamma = delta = 0
    assert uniform_x_range(cs) == pytest.approx(0.25 ** (-1.0 / 3.0), abs=1e-12)
    assert uniform_x_range(cs) == pytest.approx(1.5874010519681994, abs=1e-12)
    dominated = _coeffs(delta_sq=0.01)  # delta = 0.1 on top of eps scale
    assert uniform_x_range(dominated) == pytest.approx(min(10.0, 0.25 ** (-1 / 3)))
    zero = _coeffs(eps=1e-12)  # the (n/m)^(1/2) scale still caps the range
    assert uniform_x_range(zero) == pytest.approx(math.sqrt(400 / 5), abs=1e-12)


# -- conventions and errors ---------------------------------------------------

def test_xlnx_zero_convention():
    assert xlnx(0.0) == 0.0
    assert xlnx(1.0) == 0.0
    assert xlnx(0.5) == pytest.approx(0.5 * math.log(2.0), abs=1e-15)


def test_error_paths():
    cs = _coeffs()
    with pytest.raises(NegativeX):
        cramer_envelope(cs, -0.5)
    with pytest.raises(NegativeX):
        gaussian_tail_sandwich(-1.0)
    with pytest.raises(ParamOutOfRange):
        martingale_cramer_envelope(0.0, 0.1, 1.0)
    with pytest.raises(ParamOutOfRange):
        martingale_cramer_envelope(0.1, 0.7, 1.0)
    with pytest.raises(GammaTooLarge):
        bernstein_bound(_coeffs(gamma=3.0), 1.0)
    with pytest.raises(MissingNorms):
        peligrad_bound(1.0, 5, 1.0, [0.0, 0.0])
    with pytest.raises(NegativeX):
        bernstein_bound(cs, 0.0)


def test_bound_evaluators_are_pure():
    cs = _coeffs(gamma=0.01, delta_sq=0.002)
    xs = np.linspace(0.1, 3, 17)
    assert np.array_equal(bernstein_bound(cs, xs), bernstein_bound(cs, xs))
    assert np.array_equal(cramer_envelope(cs, xs), cramer_envelope(cs, xs))


# -- hard validity assertions ----------------------------------------------------

def test_bernstein_dominates_exact_tail_rademacher(rademacher):
    n, m = 400, 5
    coeffs = coefficient_set(rademacher, n, m)
    table = distribution_of_Sn(rademacher, n)
    xs = np.linspace(0.05, 4.0, 60)
    exact = np.exp(np.asarray(exact_tail(table, xs)))
    bound = np.asarray(bernstein_bound(coeffs, xs))
    assert np.all(exact <= bound)


def test_bernstein_dominates_exact_tail_two_state(two_state04):
    n, m = 64, 4
    coeffs = coefficient_set(two_state04, n, m)
    table = distribution_of_Sn(two_state04, n)
    xs = np.linspace(0.1, 3.0, 40)
    exact = np.exp(np.asarray(exact_tail(table, xs)))
    bound = np.asarray(bernstein_bound(coeffs, xs))
    assert np.all(exact <= bound)


def test_freedman_dominates_binomial():
    for n in (100, 400):
        for x in np.linspace(0.1, 4.0, 20):
            exact = oracles.sign_sum_tail(n, x * math.sqrt(n))
            assert exact <= freedman_bound(x, 1.0, 1.0 / math.sqrt(n)) + 1e-15


def test_peligrad_dominates_exhaustive_max(two_state04, rademacher):
    n = 12
    for model in (two_state04, rademacher):
        norms = conditional_sum_norms(model, n)
        for x in (4.0, 8.0, 12.0):
            exact = oracles.enum_max_abs_tail(model, n, x)
            assert exact <= peligrad_bound(x, n, model.bound, norms) + 1e-15


def test_peligrad_upper_ci_at_n64(two_state04):
    n, chains = 64, 20000
    paths = sample_state_paths(two_state04, n, chains, seed=17)
    partial = np.cumsum(two_state04.x_values[paths[:, 1:]], axis=1)
    peaks = np.abs(partial).max(axis=1)
    norms = conditional_sum_norms(two_state04, n)
    for x in (12.0, 20.0, 30.0):
        hits = int(np.sum(peaks >= x))
        _, hi = wilson_interval(hits, chains)
        assert hi <= peligrad_bound(x, n, two_state04.bound, norms)


def test_sandwich_on_fine_grid():
    xs = np.linspace(0.0, 8.0, 1000)
    lo, hi = gaussian_tail_sandwich(xs)
    sf = normal_sf(xs)
    assert np.all(lo <= sf) and np.all(sf <= hi)


@given(st.floats(min_value=1e-6, max_value=0.5),
       st.floats(min_value=0.0, max_value=0.5),
       st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=80, deadline=None)
def test_envelope_monotone_in_x(eps, delta, gamma):
    cs = CoefficientSet(n=1000, m=10, eps_m=eps, gamma_m=gamma,
                        delta_sq=delta ** 2, tau_sq=0.1, sigma_n=1.0,
                        gamma_truncation_error=0.0)
    xs = np.linspace(0.0, 5.0, 64)
    vals = np.asarray(cramer_envelope(cs, xs))
    assert np.all(np.diff(vals) >= -1e-12)


def test_envelope_curve_validity_flags(rademacher):
    coeffs = coefficient_set(rademacher, 400, 5)  # x_max = 0.5/0.25 = 2
    curve = envelope_curve(coeffs, np.linspace(0, 4, 9), gate_mode="practical")
    assert curve.valid.tolist() == [True] * 5 + [False] * 4
    lines = curve.to_csv().strip().splitlines()
    assert lines[0] == "x,value,valid"
    assert len(lines) == 10
    doc = curve.to_json_dict()
    assert doc["kind"] == "cramer_envelope" and doc["gate_mode"] == "practical"
