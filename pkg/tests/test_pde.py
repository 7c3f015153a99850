import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special as sc, stats

from tstfnbp import pde
from tstfnbp.errors import ConstraintError, DomainError
from tstfnbp.samplers import ProcessParams


@pytest.mark.parametrize("x", [0.05, 0.4, 1.0, 7.0, 200.0])
def test_half_stable_is_levy(x):
    assert pde.stable_density(0.5, x) == pytest.approx(stats.levy.pdf(x, scale=0.5), rel=1e-10)


def test_half_stable_cdf_at_one():
    assert pde.stable_cdf(0.5, 1.0) == pytest.approx(math.erfc(0.5), rel=1e-10)


@pytest.mark.parametrize("alpha,x", [(0.3, 0.8), (0.7, 0.4), (0.7, 3.0)])
def test_stable_density_against_inverse_laplace(alpha, x):
    with mpmath.workdps(30):
        want = float(mpmath.invertlaplace(lambda s: mpmath.exp(-s ** alpha), x, method="talbot"))
    assert pde.stable_density(alpha, x) == pytest.approx(want, rel=1e-9)


def test_stable_scaling_in_time():
    a, t, x = 0.6, 2.5, 1.3
    s = t ** (-1 / a)
    assert pde.stable_density(a, x, t) == pytest.approx(s * pde.stable_density(a, x * s), rel=1e-13)


def test_vectorised_unit_density_matches_scalar():
    z = np.array([0.2, 1.0, 5.0])
    vec = pde._unit_stable_vec(0.4, z)
    assert np.allclose(vec, [pde.stable_density(0.4, float(v)) for v in z], rtol=1e-9)


@pytest.mark.parametrize("alpha,mu,t", [(0.5, 1.0, 0.7), (0.8, 0.3, 2.0)])
def test_tempered_density_normalised_with_known_mean(alpha, mu, t):
    f = lambda x: pde.tempered_stable_density(alpha, mu, x, t)
    pts = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0]
    mass = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    mean = sum(integrate.quad(lambda x: x * f(x), a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(alpha * mu ** (alpha - 1) * t, rel=1e-7)


def test_gamma_density_matches_scipy():
    y = np.array([0.1, 1.0, 4.0])
    assert np.allclose(pde.gamma_density(y, 1.5, 2.0, 0.8), stats.gamma.pdf(y, 1.2, scale=0.5), rtol=1e-13)


def test_central_difference_order_is_two():
    assert pde.step_convergence_order(math.sin, 0.7, 0.1) == pytest.approx(2.0, abs=0.05)


def test_gamma_pde_residual():
    rep = pde.gamma_pde_residual(0.8, 1.3, ProcessParams())
    assert rep.rel_residual < 1e-8
    assert rep.point == (0.8, 1.3)


@pytest.mark.parametrize("x,t", [(0.5, 1.0), (2.0, 1.5)])
def test_tmllp_pde_residual(x, t):
    rep = pde.tmllp_pde_residual(x, t, ProcessParams())
    assert rep.rel_residual < 1e-6
    assert rep.abs_residual <= max(10 * rep.discretization_estimate, 1e-8 * abs(rep.lhs))


@pytest.mark.parametrize("n", [0, 2])
def test_count_pde_residual(n):
    rep = pde.tstfnbp_pde_residual(n, 1.0, ProcessParams(lam=0.3))
    assert rep.rel_residual < 1e-4


def test_residual_validation():
    with pytest.raises(DomainError):
        pde.gamma_pde_residual(-1.0, 1.0, ProcessParams())
    with pytest.raises(ConstraintError):
        pde.tmllp_pde_residual(1.0, 1.0, ProcessParams(lambda1=0.5, mu=1.0))
    with pytest.raises(DomainError):
        pde.stable_density(0.5, 0.0)
