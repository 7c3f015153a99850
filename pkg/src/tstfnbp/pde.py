"""Residual checks for the first-order-in-time evolution equations.

Each check compares a finite-difference time derivative of a series
(left side) with an integral over stable and gamma densities (right side).
The two sides share nothing beyond Gamma and digamma.

Right sides at operational time y use the stable density g_alpha from
Zolotarev's integral, tempered by ``exp(-mu x + mu**alpha y)``, and the
gamma density f_G of the clock, with

    d/dt f_G(y, t) = beta1 [log lambda1 + log y - digamma(beta1 t)] f_G(y, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special as sc, stats

from .analytics import fpp_pmf, tmllp_pdf, tstfnbp_pmf, MomentTable
from .errors import DomainError, QuadratureError
from .samplers import ProcessParams

__all__ = [
    "ResidualReport", "stable_density", "stable_cdf", "tempered_stable_density",
    "gamma_density", "gamma_pde_residual", "tmllp_pde_residual", "tstfnbp_pde_residual",
    "step_convergence_order",
]

_FLOOR = 1e-300


@dataclass(frozen=True)
class ResidualReport:
    point: tuple
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    discretization_estimate: float

    @classmethod
    def build(cls, point, lhs, rhs, disc, floor=_FLOOR):
        lhs, rhs = float(lhs), float(rhs)
        a = abs(lhs - rhs)
        return cls(tuple(point), lhs, rhs, a, a / max(abs(lhs), abs(rhs), floor), float(disc))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def _log_a(phi, alpha):
    """log of Zolotarev's kernel a(phi), increasing on (0, pi)."""
    sa = np.sin(alpha * phi)
    return (np.log(sa) - np.log(np.sin(phi))) / (1 - alpha) + np.log(np.sin((1 - alpha) * phi)) - np.log(sa)


def _log_a0(alpha):
    return math.log(alpha) / (1 - alpha) + math.log((1 - alpha) / alpha)


def _peak_phi(alpha, c):
    """phi where a(phi) * c = 1, or None if a*c > 1 (or < 1) on the whole range."""
    target = -math.log(c)
    if _log_a0(alpha) >= target:
        return None
    hi = math.pi * (1 - 1e-12)
    if _log_a(hi, alpha) <= target:
        return None
    return optimize.brentq(lambda p: _log_a(p, alpha) - target, 1e-12, hi, xtol=1e-14)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError("need 0 < alpha < 1")


def _unit_stable(alpha: float, z: float, cdf: bool = False) -> float:
    c = z ** (-alpha / (1 - alpha))

    def f(phi):
        if phi <= 0.0:
            la = _log_a0(alpha)
        else:
            la = float(_log_a(phi, alpha))
        ea = math.exp(la)
        return math.exp(-ea * c) if cdf else math.exp(la - ea * c)

    pk = _peak_phi(alpha, c)
    pts = [0.0] + ([pk] if pk is not None else []) + [math.pi]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += v
    total /= math.pi
    if cdf:
        return total
    return alpha / (1 - alpha) * z ** (-1 / (1 - alpha)) * total


def stable_density(alpha: float, x, t: float = 1.0):
    """Density of the alpha-stable subordinator at time t, ``E exp(-u S_t) = exp(-t u**alpha)``."""
    _check_alpha(alpha)
    if t <= 0:
        raise DomainError("t must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    s = t ** (-1 / alpha)
    out = np.vectorize(lambda xx: _unit_stable(alpha, xx * s))(x) * s
    return float(out) if out.ndim == 0 else out


def stable_cdf(alpha: float, x, t: float = 1.0):
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    s = t ** (-1 / alpha)
    out = np.vectorize(lambda xx: _unit_stable(alpha, xx * s, cdf=True) if xx > 0 else 0.0)(x)
    return float(out) if out.ndim == 0 else out


def tempered_stable_density(alpha: float, mu: float, x, t: float = 1.0):
    """``exp(-mu x + mu**alpha t) g_alpha(x, t)``."""
    if mu < 0:
        raise DomainError("mu must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.exp(-mu * x + mu ** alpha * t) * stable_density(alpha, x, t)
    return float(out) if np.ndim(out) == 0 else out


def _unit_stable_vec(alpha: float, z: np.ndarray) -> np.ndarray:
    """Vectorised unit stable density (adaptive over phi, shared across z)."""
    z = np.asarray(z, dtype=float)
    e = -alpha / (1 - alpha)
    c = np.exp(e * np.log(z))
    la0 = _log_a0(alpha)

    def f(phi):
        la = la0 if phi <= 0 else float(_log_a(phi, alpha))
        return np.exp(la - math.exp(la) * c)

    val, err = integrate.quad_vec(f, 0.0, math.pi, epsabs=1e-300, epsrel=1e-11, norm="max", limit=4000)
    return alpha / (1 - alpha) * np.exp(-np.log(z) / (1 - alpha)) * val / math.pi


def _tempered_matrix(alpha, mu, x, y):
    """g_{alpha,mu}(x_i, y_j) for arrays x, y (outer product)."""
    x = np.asarray(x, dtype=float)[:, None]
    y = np.asarray(y, dtype=float)[None, :]
    s = y ** (-1 / alpha)
    z = (x * s).ravel()
    g = _unit_stable_vec(alpha, z).reshape(x.shape[0], y.shape[1]) * s
    return np.exp(-mu * x + mu ** alpha * y) * g


def gamma_density(y, t: float, lambda1: float, beta1: float):
    """Density of G(t) ~ Gamma(shape beta1 t, rate lambda1)."""
    y = np.asarray(y, dtype=float)
    a = beta1 * t
    out = np.exp(a * math.log(lambda1) + (a - 1) * np.log(y) - lambda1 * y - math.lgamma(a))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _central(f, t, h):
    return (f(t + h) - f(t - h)) / (2 * h)


def _richardson(f, t, h):
    """Once-extrapolated central difference and an error estimate."""
    d1 = _central(f, t, h)
    d2 = _central(f, t, h / 2)
    rich = (4 * d2 - d1) / 3
    return rich, abs(rich - d2)


def step_convergence_order(f, t: float, h: float) -> float:
    """Observed order of the central difference from three halvings of h."""
    d = [_central(f, t, h / 2 ** k) for k in range(3)]
    num, den = abs(d[0] - d[1]), abs(d[1] - d[2])
    if den == 0 or num == 0:
        return math.inf
    return math.log2(num / den)


def _default_step(t):
    return min(max(1e-3, 1e-2 * t), t / 4)


# ---------------------------------------------------------------------------
# quadrature nodes
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _leg(N):
    return np.polynomial.legendre.leggauss(N)


def _power_nodes(power: float, N: int):
    """Nodes/weights on (0, 1) after y = w**power (smooths y**a and log y near 0)."""
    x, w = _leg(N)
    u = 0.5 * (x + 1)
    return u ** power, 0.5 * w * power * u ** (power - 1)


def _panel_nodes(lo: float, hi: float, n_panels: int, N: int, geometric: bool = True):
    x, w = _leg(N)
    if geometric and lo > 0:
        edges = np.geomspace(lo, hi, n_panels + 1)
    else:
        edges = np.linspace(lo, hi, n_panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _clock_nodes(t, p: ProcessParams, N: int):
    """Nodes for y in int g_{a,mu}(x, y) (...) f_G(y, t) dy.

    f_G(y) exp(mu**a y) is a Gamma(beta1 t, lambda1 - mu**a) shape, so the
    upper limit is its 1e-16 upper quantile, doubled.
    """
    rate = p.lambda1 - p.mu ** p.alpha
    ymax = 2 * float(stats.gamma.isf(1e-16, a=p.beta1 * t, scale=1 / rate))
    ymax = max(ymax, 2.0)
    y0, w0 = _power_nodes(max(2.0, 2.0 / (p.beta1 * t)), N)
    y1, w1 = _panel_nodes(1.0, ymax, 8, N)
    return np.concatenate([y0, y1]), np.concatenate([w0, w1])


def _kernel(y, t, p: ProcessParams):
    """[log lambda1 - digamma(beta1 t) + log y] f_G(y, t) = (1/beta1) d/dt f_G."""
    return (math.log(p.lambda1) - sc.digamma(p.beta1 * t) + np.log(y)) * gamma_density(y, t, p.lambda1, p.beta1)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def gamma_pde_residual(x: float, t: float, params: ProcessParams, h: float | None = None) -> ResidualReport:
    """``d/dt f_G = beta1 (log lambda1 + log x - digamma(beta1 t)) f_G``."""
    if x <= 0 or t <= 0:
        raise DomainError("x and t must be positive")
    p = params
    h = h or _default_step(t)
    lhs, disc = _richardson(lambda tt: gamma_density(x, tt, p.lambda1, p.beta1), t, h)
    rhs = p.beta1 * (math.log(p.lambda1) + math.log(x) - sc.digamma(p.beta1 * t)) * gamma_density(
        x, t, p.lambda1, p.beta1)
    return ResidualReport.build((x, t), lhs, rhs, disc)


def _tmllp_rhs(x, t, p: ProcessParams, N: int):
    y, w = _clock_nodes(t, p, N)
    g = _tempered_matrix(p.alpha, p.mu, np.atleast_1d(x), y)
    return p.beta1 * (g @ (w * _kernel(y, t, p)))


def tmllp_pde_residual(x: float, t: float, params: ProcessParams, h: float | None = None,
                       nodes: int = 48) -> ResidualReport:
    """Time derivative of the M(t) series density against
    ``beta1 int g_{a,mu}(x, y) [log lambda1 - digamma(beta1 t) + log y] f_G(y, t) dy``.

    ``discretization_estimate`` combines the Richardson error of the left
    side with the change of the right side when the node count is halved.
    """
    params.require_pdf()
    if x <= 0 or t <= 0:
        raise DomainError("x and t must be positive")
    p = params
    h = h or _default_step(t)
    lhs, d_lhs = _richardson(lambda tt: tmllp_pdf(x, tt, p), t, h)
    rhs = float(_tmllp_rhs(x, t, p, nodes)[0])
    coarse = float(_tmllp_rhs(x, t, p, nodes // 2)[0])
    return ResidualReport.build((x, t), lhs, rhs, d_lhs + abs(rhs - coarse))


def _scaled_inner(y1, t, p: ProcessParams, N: int):
    """``int g_{a,mu}(y1, y) K(y) dy`` for a vector y1, with y = y1**a v.

    Self-similarity gives ``g_a(y1, y1**a v) dy = y1**(a-1) v**(-1/a) g_a(v**(-1/a), 1) dv``,
    so the unit density is needed only on the v nodes.
    """
    a = p.alpha
    # unit density at z = v**(-1/a) is ~exp(-(1-a) a**(a/(1-a)) v**(1/(1-a)))
    vmax = 2 * (45.0 / ((1 - a) * a ** (a / (1 - a)))) ** (1 - a)
    v0, w0 = _power_nodes(2.0, N)
    v1, w1 = _panel_nodes(1.0, vmax, 12, N, geometric=False)
    v = np.concatenate([v0, v1])
    w = np.concatenate([w0, w1])
    gv = _unit_stable_vec(a, v ** (-1 / a)) * v ** (-1 / a) * w
    y1 = np.asarray(y1, dtype=float)[:, None]
    y = y1 ** a * v[None, :]
    tilt = np.exp(-p.mu * y1 + p.mu ** a * y)
    return y1[:, 0] ** (a - 1) * ((tilt * _kernel(y, t, p)) @ gv)


def _count_rhs(n, t, p: ProcessParams, N: int):
    """int P[N_beta(y1) = n] int g_{a,mu}(y1, y) K(y) dy dy1 on fixed rules."""
    # outer variable: M(t) density behaves like y1**(a beta1 t - 1) near 0 and exp(-mu y1) far out
    y1max = 2 * (p.drift * t + 40.0 / p.mu)
    a0, b0 = _power_nodes(max(2.0, 2.0 / (p.alpha * p.beta1 * t)), N)
    a1, b1 = _panel_nodes(1.0, y1max, 10, N)
    y1 = np.concatenate([a0, a1])
    w1 = np.concatenate([b0, b1])
    inner = _scaled_inner(y1, t, p, N)
    return float(np.sum(w1 * fpp_pmf(n, y1, p.lam, p.beta) * inner))


def tstfnbp_pde_residual(n: int, t: float, params: ProcessParams, h: float | None = None,
                         nodes: int = 60) -> ResidualReport:
    """``(1/beta1) d/dt P[Q(t) = n]`` from the moment series against the double integral

    ``int P[N_beta(y1) = n] int g_{a,mu}(y1, y) [log lambda1 - digamma(beta1 t) + log y] f_G(y, t) dy dy1``.
    """
    params.require_pdf()
    if n < 0 or t <= 0:
        raise DomainError("need n >= 0 and t > 0")
    p = params
    h = h or _default_step(t)

    def pmf(tt):
        return tstfnbp_pmf(n, tt, p, None, MomentTable.quadrature(tt, p))

    lhs, d_lhs = _richardson(pmf, t, h)
    lhs /= p.beta1
    rhs = _count_rhs(n, t, p, nodes)
    coarse = _count_rhs(n, t, p, nodes // 2)
    if not math.isfinite(rhs):
        raise QuadratureError("double integral is not finite")
    return ResidualReport.build((n, t), lhs, rhs, d_lhs / p.beta1 + abs(rhs - coarse))
