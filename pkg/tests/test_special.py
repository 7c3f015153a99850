import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special as sc

from tstfnbp.errors import DivergenceError, DomainError, PoleError
from tstfnbp.special import (SeriesControl, _ml_integral, _prabhakar_integral, generalized_wright,
                             incomplete_beta, mittag_leffler, partial_bell_ordinary, prabhakar_ml)
from tstfnbp.verification import ml_series_oracle


def mp_prabhakar(alpha, beta, rho, z, dps=60):
    with mpmath.workdps(dps):
        f = lambda k: mpmath.rf(rho, k) * mpmath.mpf(z) ** k / (mpmath.factorial(k) * mpmath.gamma(alpha * k + beta))
        return float(mpmath.nsum(f, [0, mpmath.inf], method="direct", steps=[4000]))


@pytest.mark.parametrize("z", [-5.0, -0.3, 0.0, 0.4, 2.5])
def test_ml_alpha_one_is_exponential(z):
    assert mittag_leffler(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-14)


@pytest.mark.parametrize("x", [0.0, 0.5, 1.7, 4.0])
def test_ml_alpha_two_is_cosine(x):
    assert mittag_leffler(2.0, 1.0, -x * x) == pytest.approx(math.cos(x), abs=1e-13)


@pytest.mark.parametrize("x", [0.1, 1.0, 3.0, 10.0, 50.0, 300.0])
def test_ml_half_matches_erfcx(x):
    assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(sc.erfcx(x), rel=1e-11)


def test_ml_array_matches_scalar():
    z = np.array([-20.0, -2.0, -0.1, 0.0, 0.3, 3.0])
    vec = mittag_leffler(0.7, 1.2, z)
    assert vec.shape == z.shape
    assert np.allclose(vec, [mittag_leffler(0.7, 1.2, float(v)) for v in z], rtol=1e-13)


@pytest.mark.parametrize("x", [0.5, 2.0, 12.0])
def test_ml_small_alpha_against_inverse_laplace(x):
    a = 0.3
    with mpmath.workdps(30):
        want = float(mpmath.invertlaplace(lambda s: s ** (a - 1) / (s ** a + x), 1, method="talbot"))
    assert mittag_leffler(a, 1.0, -x) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("alpha,beta,x", [(0.2, 2.5, 30.0), (0.3, 1.9, 1.0), (0.7, 3.1, 100.0)])
def test_ml_large_beta_negative_axis(alpha, beta, x):
    with mpmath.workdps(30):
        want = float(mpmath.invertlaplace(lambda s: s ** (alpha - beta) / (s ** alpha + x), 1, method="talbot"))
    assert mittag_leffler(alpha, beta, -x) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("alpha,beta", [(0.5, 1.0), (0.7, 0.8), (0.9, 1.5)])
@pytest.mark.parametrize("z", [-40.0, -5.0, -0.5, 1.5])
def test_ml_against_exact_series_oracle(alpha, beta, z):
    assert mittag_leffler(alpha, beta, z) == pytest.approx(ml_series_oracle(alpha, beta, z), rel=1e-10)


@pytest.mark.parametrize("alpha,beta,x", [(0.5, 1.0, 3.0), (0.4, 0.9, 8.0), (0.8, 1.3, 0.7)])
def test_integral_routes_agree_at_rho_one(alpha, beta, x):
    assert _prabhakar_integral(alpha, beta, 1.0, x) == pytest.approx(_ml_integral(alpha, beta, x), rel=1e-10)


@pytest.mark.parametrize("alpha,beta,rho,z", [
    (0.5, 2.0, 2.0, -3.0), (0.5, 3.5, 6.0, -1.2), (0.8, 1.1, 0.6, 2.0), (0.5, 0.5, 3.0, 0.7),
])
def test_prabhakar_against_mpmath(alpha, beta, rho, z):
    assert prabhakar_ml(alpha, beta, rho, z) == pytest.approx(mp_prabhakar(alpha, beta, rho, z), rel=1e-9)


@pytest.mark.parametrize("alpha,beta,rho,x", [(0.3, 1.0, 4.0, 15.0), (0.5, 1.5, 3.0, 40.0), (0.6, 0.9, 2.0, 6.0)])
def test_prabhakar_negative_axis_against_inverse_laplace(alpha, beta, rho, x):
    # series cancellation is hopeless here even in mp; invert s^(a rho - b) / (s^a + x)^rho at t = 1
    g = alpha * rho - beta
    with mpmath.workdps(30):
        want = float(mpmath.invertlaplace(lambda s: s ** g / (s ** alpha + x) ** rho, 1, method="talbot"))
    assert prabhakar_ml(alpha, beta, rho, -x) == pytest.approx(want, rel=1e-10)


def test_prabhakar_rho_zero_limit_and_at_origin():
    assert prabhakar_ml(0.6, 1.4, 2.0, 0.0) == pytest.approx(1.0 / math.gamma(1.4), rel=1e-15)
    # (rho)_k at rho=1 reduces to the two-parameter function
    assert prabhakar_ml(0.6, 1.4, 1.0, -2.0) == pytest.approx(mittag_leffler(0.6, 1.4, -2.0), rel=1e-13)


def test_prabhakar_rising_factorial_example():
    # (2)_k / k! = k + 1, so E^2_{1,1}(1) = sum (k+1)/k! = 2e
    assert prabhakar_ml(1.0, 1.0, 2.0, 1.0) == pytest.approx(2 * math.e, rel=1e-14)
    assert prabhakar_ml(0.5, 1.5, 3.0, 0.0) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-15)


def test_prabhakar_rejects_bad_parameters():
    with pytest.raises(DomainError):
        prabhakar_ml(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        prabhakar_ml(0.5, 1.0, 1.0, float("nan"))


@given(st.floats(0.2, 0.95), st.floats(0.5, 2.5), st.floats(-30.0, -0.01))
@settings(max_examples=30, deadline=None)
def test_ml_negative_axis_is_positive_and_below_one_over_gamma(alpha, beta, z):
    # completely monotone for 0 < alpha <= 1, alpha <= beta
    if beta < alpha:
        return
    v = mittag_leffler(alpha, beta, z)
    assert 0.0 < v <= 1.0 / math.gamma(beta) * (1 + 1e-12)


@given(st.floats(0.2, 0.9), st.floats(-8.0, -0.1), st.floats(-8.0, -0.1))
@settings(max_examples=30, deadline=None)
def test_ml_decreasing_on_negative_axis(alpha, z1, z2):
    lo, hi = sorted((z1, z2))
    if hi - lo < 1e-6:
        return
    assert mittag_leffler(alpha, 1.0, lo) < mittag_leffler(alpha, 1.0, hi)


def test_wright_reduces_to_exponential_and_ml():
    assert generalized_wright([(1, 1)], [(1, 1)], 0.7) == pytest.approx(math.exp(0.7), rel=1e-14)
    # 1Psi1[(1,1); (b,a); z] = E_{a,b}(z)
    assert generalized_wright([(1, 1)], [(1.2, 0.6)], -2.0) == pytest.approx(mittag_leffler(0.6, 1.2, -2.0),
                                                                           rel=1e-12)


def test_wright_radius_and_poles():
    with pytest.raises(DivergenceError):
        generalized_wright([(1, 1), (1, 1)], [(1, 1)], 1.5)
    with pytest.raises(DomainError):
        generalized_wright([(1, 0)], [(1, 1)], 0.5)


def test_wright_sum_of_k_plus_one_over_factorial_squared():
    # sum (k+1)/(k!)^2 = I0(2) + I1(2)
    want = sc.i0(2.0) + sc.i1(2.0)
    assert generalized_wright([(2, 1)], [(1, 1), (1, 1)], 1.0) == pytest.approx(want, rel=1e-13)
    # with a single lower pair it is sum (k+1)/k! = 2e
    assert generalized_wright([(2, 1)], [(1, 1)], 1.0) == pytest.approx(2 * math.e, rel=1e-14)


def test_incomplete_beta_and_bell():
    assert incomplete_beta(2, 3, 1.0) == pytest.approx(1 / 12, rel=1e-14)
    assert incomplete_beta(0.5, 0.5, 0.5) == pytest.approx(math.pi / 2, rel=1e-13)
    with pytest.raises(DomainError):
        incomplete_beta(1, 1, 1.5)
    assert partial_bell_ordinary([1, 2, 3], 3, 2) == 4.0
    assert partial_bell_ordinary([2.0], 1, 1) == 2.0
    assert partial_bell_ordinary([], 0, 0) == 1.0
    with pytest.raises(DomainError):
        partial_bell_ordinary([1, 1], 2, 3)


def test_series_control_validation():
    with pytest.raises(DomainError):
        SeriesControl(max_terms=0)
    with pytest.raises(DomainError):
        SeriesControl(abs_tol=0.0, rel_tol=0.0)
