import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special as sc, stats

from tstfnbp import analytics as A
from tstfnbp.errors import DivergenceError, DomainError, NumericalError
from tstfnbp.samplers import ProcessParams, RngStream

P = ProcessParams()                       # series pmf diverges here (lam**2 > mu)
PS = ProcessParams(lam=0.3)               # series pmf converges


def pdf_integral(g, t, p):
    f = lambda x: g(x) * float(A.tmllp_pdf(x, t, p))
    edges = [0.0, 1e-4, 0.01, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0]
    return sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
               for a, b in zip(edges[:-1], edges[1:]))


def test_pdf_integrates_to_one_and_reproduces_laplace():
    for t in (0.5, 2.0):
        assert pdf_integral(lambda x: 1.0, t, P) == pytest.approx(1.0, abs=1e-8)
        assert pdf_integral(lambda x: math.exp(-0.8 * x), t, P) == pytest.approx(
            float(A.tmllp_laplace(0.8, t, P)), rel=1e-8)


def test_laplace_derivatives_against_mpmath_diff():
    t = 1.7
    with mpmath.workdps(40):
        L = lambda u: (P.lambda1 / (P.lambda1 - mpmath.mpf(P.mu) ** P.alpha + (P.mu + u) ** P.alpha)) ** (P.beta1 * t)
        want = [float(mpmath.diff(L, 0.3, j)) for j in range(5)]
    got = A.tmllp_laplace_derivatives(0.3, t, P, 4)
    assert np.allclose(got, want, rtol=1e-11)


@pytest.mark.parametrize("q", [0.25, 0.5, 1.0, 1.5, 2.0, 3.7])
@pytest.mark.parametrize("t", [0.3, 2.0])
def test_fractional_moment_against_density_integral(q, t):
    want = pdf_integral(lambda x: x ** q, t, P)
    assert A.tmllp_fractional_moment(q, t, P) == pytest.approx(want, rel=1e-7)


def test_fractional_moment_large_order_against_mpmath():
    # E[M^q] = (1/Gamma(r)) int_0^inf u^(r-1) (-1)^n L^(n)(u) du, n = ceil(q), r = n - q
    p, t, q = ProcessParams(beta1=3.0, mu=1.0), 1.0, 4.4
    n, r = 5, 0.6
    with mpmath.workdps(30):
        L = lambda u: (p.lambda1 / (p.lambda1 - 1 + (1 + u) ** p.alpha)) ** (p.beta1 * t)
        g = lambda u: u ** (r - 1) * (-1) ** n * mpmath.diff(L, u, n)
        want = float(mpmath.quad(g, [0, 1, 10, 100, mpmath.inf]) / mpmath.gamma(r))
    assert A.tmllp_fractional_moment(q, t, p) == pytest.approx(want, rel=1e-8)


def test_untempered_moment_closed_form_and_domain():
    p = ProcessParams(mu=0.0, alpha=0.6, beta1=1.5, lambda1=2.0)
    q, t = 0.4, 2.0
    shape = p.beta1 * t
    want = (math.gamma(1 - q / p.alpha) / math.gamma(1 - q)
            * math.gamma(shape + q / p.alpha) / math.gamma(shape) * p.lambda1 ** (-q / p.alpha))
    assert A.tmllp_fractional_moment(q, t, p) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        A.tmllp_fractional_moment(0.6, t, p)
    with pytest.raises(DomainError):
        A.tmllp_moment_asymptote(0.5, t, p)


def test_moment_at_zero_time_and_negative_order():
    assert A.tmllp_fractional_moment(0.0, 0.0, P) == 1.0
    assert A.tmllp_fractional_moment(0.7, 0.0, P) == 0.0
    with pytest.raises(DomainError):
        A.tmllp_fractional_moment(-0.1, 1.0, P)


def test_moment_asymptote_ratio_tends_to_one():
    p = ProcessParams(mu=1.0)
    r = [A.tmllp_fractional_moment(0.5, t, p) / A.tmllp_moment_asymptote(0.5, t, p) for t in (10, 100, 1000)]
    assert abs(r[2] - 1) < abs(r[1] - 1) < abs(r[0] - 1)
    assert abs(r[2] - 1) < 0.02


def test_fpp_pmf_sums_and_mean_variance():
    lam, beta, t = 1.3, 0.6, 2.0
    probs = np.array([A.fpp_pmf(n, t, lam, beta) for n in range(60)])
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    n = np.arange(60)
    assert probs @ n == pytest.approx(A.fpp_mean(t, lam, beta), rel=1e-9)
    var = probs @ n ** 2 - (probs @ n) ** 2
    assert var == pytest.approx(A.fpp_variance(t, lam, beta), rel=1e-8)
    assert A.fpp_variance(t, lam, beta) == pytest.approx(A.fpp_variance_beta_form(t, lam, beta), rel=1e-12)


def test_fpp_at_beta_one_is_poisson():
    for n in range(6):
        assert A.fpp_pmf(n, 2.0, 1.5, 1.0) == pytest.approx(stats.poisson.pmf(n, 3.0), rel=1e-12)


def test_fpp_covariance_diagonal_is_variance():
    assert A.fpp_covariance(2.0, 2.0, 1.0, 0.7) == pytest.approx(A.fpp_variance(2.0, 1.0, 0.7), rel=1e-12)


def test_nb_and_fnbp_special_cases():
    lam, l1, b1, t = 0.8, 2.0, 1.5, 1.2
    for n in range(8):
        want = stats.nbinom.pmf(n, b1 * t, l1 / (l1 + lam))
        assert A.nb_pmf(n, t, lam, l1, b1) == pytest.approx(want, rel=1e-12)
        assert A.fnbp_pmf(n, t, lam, l1, b1, 1.0) == pytest.approx(want, rel=1e-10)
    total = sum(A.fnbp_pmf(n, t, 0.5, 2.0, 1.5, 0.7) for n in range(80))
    assert total == pytest.approx(1.0, abs=1e-8)


def test_pmf_series_matches_conditioning():
    for n in (0, 1, 3):
        assert A.tstfnbp_pmf(n, 1.5, PS) == pytest.approx(A.tstfnbp_pmf_by_conditioning(n, 1.5, PS), rel=1e-8)


def test_pmf_vector_moments_and_transforms():
    t = 1.0
    v = A.tstfnbp_pmf_vector(25, t, PS)
    assert v.total() == pytest.approx(1.0, abs=1e-12)
    assert v.tail_bound < 1e-10
    n = np.arange(26)
    assert v.probs @ n == pytest.approx(A.tstfnbp_mean(t, PS), rel=1e-8)
    var = v.probs @ n ** 2 - (v.probs @ n) ** 2
    assert var == pytest.approx(A.tstfnbp_variance(t, PS), rel=1e-7)
    assert A.tstfnbp_pgf(0.4, t, PS) == pytest.approx(v.probs @ 0.4 ** n, rel=1e-10)
    assert A.tstfnbp_laplace(0.9, t, PS) == pytest.approx(v.probs @ np.exp(-0.9 * n), rel=1e-10)
    assert A.tstfnbp_pgf(1.0, t, PS) == 1.0


def test_pmf_series_divergence_and_auto_route():
    assert not A.pmf_series_converges(P)
    with pytest.raises(DivergenceError):
        A.tstfnbp_pmf(0, 1.0, P)
    with pytest.raises(DivergenceError):
        A.tstfnbp_pgf(0.0, 1.0, P)
    v = A.tstfnbp_pmf_vector(4, 1.0, P, method="auto")
    assert v.probs[0] == pytest.approx(A.tstfnbp_pmf_by_conditioning(0, 1.0, P), rel=1e-12)
    with pytest.raises(DomainError):
        A.tstfnbp_pmf_vector(4, 1.0, PS, method="magic")


def test_pmf_monte_carlo_moment_source():
    mc = A.tstfnbp_pmf(0, 1.0, PS, moment_source="monte_carlo", rng=RngStream(3), n_samples=50_000)
    assert mc == pytest.approx(A.tstfnbp_pmf(0, 1.0, PS), abs=5e-3)
    with pytest.raises(DomainError):
        A.tstfnbp_pmf(0, 1.0, PS, moment_source="monte_carlo")


def test_mean_and_variance_against_simulation():
    from tstfnbp.samplers import sample_tstfnbp_paths
    q = sample_tstfnbp_paths(P, [2.0], RngStream(11), n_paths=100_000)[:, 0].astype(float)
    mean = A.MomentEstimate.from_samples(q)
    assert abs(mean.z_score(A.tstfnbp_mean(2.0, P))) < 4
    m2 = A.MomentEstimate.from_samples(q * (q - 1))
    assert abs(m2.z_score(A.tstfnbp_factorial_moment2(2.0, P))) < 4


def test_overdispersion_gap_positive():
    for t in (0.1, 1.0, 10.0):
        gap = A.dispersion_gap(t, P)
        assert gap > 0
        assert gap == pytest.approx(A.tstfnbp_variance(t, P) - A.tstfnbp_mean(t, P), rel=1e-10)


def test_covariance_diagonal_is_exact_variance():
    # at s = t the integrand is a multiple of the M_t**(2 beta) control, so no noise survives
    est = A.tstfnbp_covariance(1.5, 1.5, P, RngStream(5), 40_000)
    assert est.value == pytest.approx(A.tstfnbp_variance(1.5, P), rel=1e-12)
    off = A.tstfnbp_covariance(1.0, 3.0, P, RngStream(5), 40_000)
    assert 0 < off.std_error < 1e-2 * off.value
    with pytest.raises(DomainError):
        A.tstfnbp_covariance(2.0, 1.0, P, RngStream(5))
    c = A.correlation(1.0, 4.0, P, RngStream(6), 40_000)
    assert 0 < c.value < 1


def test_lrd_slope_grid_checks_and_order_invariance():
    with pytest.raises(DomainError):
        A.lrd_slope(1.0, [2.0, 20.0], P, RngStream(1), 1000)
    with pytest.raises(DomainError):
        A.lrd_slope(5.0, [2.0, 500.0], P, RngStream(1), 1000)
    a = A.lrd_slope(1.0, [10.0, 100.0, 1000.0], P, RngStream(2), 5000)
    b = A.lrd_slope(1.0, [1000.0, 10.0, 100.0], P, RngStream(2), 5000)
    assert a.slope == b.slope
    assert a.slope < 0


def test_levy_measure_series_against_quadrature():
    p = ProcessParams(beta=1.0, lambda1=1.5, mu=1.0, lam=1.0)
    for k in (1, 2, 5):
        assert A.levy_measure_beta1(k, p) == pytest.approx(A.levy_measure_by_quadrature(k, p), rel=1e-8)
    total = sum(A.levy_measure_beta1(k, p) for k in range(1, 200))
    assert total == pytest.approx(A.levy_total_mass_by_quadrature(p), rel=1e-8)
    with pytest.raises(DomainError):
        A.levy_measure_beta1(1, p.with_(beta=0.5))
    with pytest.raises(DivergenceError):
        A.levy_measure_beta1(1, ProcessParams(beta=1.0, lambda1=50.0, mu=0.01, lam=0.1))


def test_levy_density_against_gamma_stable_mixture():
    # pi(x) = beta1 int_0^inf f_TS(x; y) e^{-lambda1 y} / y dy
    from tstfnbp.pde import tempered_stable_density
    p = ProcessParams(alpha=0.5, lambda1=1.5, mu=1.0)
    for x in (0.3, 2.0):
        f = lambda y: p.beta1 * float(tempered_stable_density(p.alpha, p.mu, x, y)) * math.exp(-p.lambda1 * y) / y
        want = integrate.quad(f, 0, 60, limit=400, points=[0.1, 1, 5])[0]
        assert float(A.tmllp_levy_density(x, p)) == pytest.approx(want, rel=1e-7)


def test_first_passage_modes():
    p = ProcessParams(beta1=10.0, lambda1=1.2, mu=1.0, lam=0.6)
    t, k = 1.0, 2
    surv = A.first_passage(k, t, p)
    assert surv + A.first_passage(k, t, p, mode="cdf") == 1.0
    assert surv == pytest.approx(A.tstfnbp_pmf(0, t, p) + A.tstfnbp_pmf(1, t, p), rel=1e-14)
    dens, err = A.first_passage(k, t, p, mode="density", return_error=True)
    assert dens > 0 and err < 1e-6 * dens
    # density integrates to the cdf increment
    ts = np.linspace(0.8, 1.2, 5)
    d = [A.first_passage(k, float(s), p, mode="density") for s in ts]
    inc = A.first_passage(k, 1.2, p, mode="cdf") - A.first_passage(k, 0.8, p, mode="cdf")
    assert integrate.simpson(d, x=ts) == pytest.approx(inc, rel=1e-4)
    assert A.first_passage(k, 0.0, p) == 1.0
    with pytest.raises(DomainError):
        A.first_passage(0, t, p)


def test_moment_estimate_validation():
    with pytest.raises(NumericalError):
        A.MomentEstimate(float("nan"), 0.1, 10)
    e = A.MomentEstimate(1.0, 0.0, 3)
    assert e.z_score(1.0) == 0.0
    assert e.z_score(2.0) == math.inf
