"""Closed-form and series evaluation of TSTFNBP distributional quantities.

Notation: ``M(t)`` is the tempered Mittag-Leffler Levy process, ``Q(t)`` the
negative binomial type count ``N_beta(M(t), lam)``.  Almost everything here
is driven by the fractional moments ``E[M(t)**q]``, computed from the
Laplace transform of ``M(t)``:

* integer ``q``: exact derivatives of the transform at 0;
* non-integer ``q``: ``(-1)**n / Gamma(n-q) * int_0^inf L^(n)(u) u**(n-q-1) du``
  with ``n = ceil(q)``, by adaptive quadrature;
* ``mu = 0``: product of stable and gamma moments (finite only for q < alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special as sc

from .errors import (CancellationError, DivergenceError, DomainError, NumericalError,
                     QuadratureError, TruncationError)
from .samplers import ProcessParams, RngStream, sample_tmllp_paths, _gen
from .special import (DEFAULT_CONTROL, SeriesControl, _robust_scalar_sum, incomplete_beta,
                      mittag_leffler, prabhakar_ml)

__all__ = [
    "MomentEstimate", "PmfVector", "MomentTable", "LrdFit",
    "tmllp_laplace", "tmllp_laplace_derivatives", "tmllp_pdf", "tmllp_levy_density",
    "tmllp_fractional_moment", "tmllp_moment_asymptote",
    "fpp_pmf", "fpp_mean", "fpp_variance", "fpp_variance_beta_form", "fpp_covariance",
    "tstfnbp_pmf", "tstfnbp_pmf_vector", "tstfnbp_pmf_by_conditioning",
    "nb_pmf", "fnbp_pmf",
    "tstfnbp_mean", "tstfnbp_variance", "tstfnbp_factorial_moment2", "dispersion_gap",
    "tstfnbp_covariance", "correlation", "lrd_slope",
    "tstfnbp_laplace", "tstfnbp_pgf",
    "levy_measure_beta1", "levy_measure_by_quadrature",
    "first_passage",
]

# ratio max|term|/|sum| above which alternating moment series are summed exactly
_EXTENDED_SUM_RATIO = 1e6
_CANCELLATION_LIMIT = 1e12


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "std_error", float(self.std_error))
        if not math.isfinite(self.value):
            raise NumericalError("Monte Carlo estimate is not finite")
        if self.std_error < 0 or self.n_samples < 1:
            raise DomainError("std_error must be >= 0 and n_samples >= 1")

    @classmethod
    def from_samples(cls, x) -> "MomentEstimate":
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        sd = float(x.std(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), sd / math.sqrt(n), n)

    def z_score(self, target: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.value == target else math.inf
        return (self.value - target) / self.std_error


@dataclass(frozen=True)
class PmfVector:
    """Probabilities for n = 0..n_max at time ``t`` plus the mass beyond n_max."""

    t: float
    probs: np.ndarray
    tail_bound: float

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def total(self) -> float:
        return float(math.fsum(self.probs) + self.tail_bound)


@dataclass(frozen=True)
class LrdFit:
    slope: float
    intercept: float
    slope_se_mc: float
    slope_se_fit: float
    t_grid: tuple
    correlations: tuple

    @property
    def noisy(self) -> bool:
        """Monte Carlo noise exceeds the regression's own confidence width."""
        return self.slope_se_mc > self.slope_se_fit


# ---------------------------------------------------------------------------
# TMLLP transform, derivatives and moments
# ---------------------------------------------------------------------------

def tmllp_laplace(u, t: float, params: ProcessParams):
    """``E[exp(-u M(t))] = (lambda1 / (lambda1 - mu**a + (mu+u)**a))**(beta1 t)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or t < 0:
        raise DomainError("u and t must be non-negative")
    p = params
    base = p.lambda1 / (p.lambda1 - p.mu ** p.alpha + (p.mu + u) ** p.alpha)
    out = base ** (p.beta1 * t)
    return float(out) if out.ndim == 0 else out


def _laplace_derivs(u, t: float, p: ProcessParams, n: int) -> list:
    a, mu = p.alpha, p.mu
    x = mu + u
    bt = p.beta1 * t
    # h_j = d^j/du^j (mu+u)^a
    h = [x ** a]
    fall = 1.0
    for j in range(1, n + 1):
        fall *= (a - j + 1)
        h.append(fall * x ** (a - j))
    D = p.lambda1 - mu ** a + h[0]
    g = [np.log(D)] + [0.0] * n
    for j in range(1, n + 1):
        acc = h[j]
        for i in range(1, j):
            acc = acc - math.comb(j - 1, i) * h[i] * g[j - i]
        g[j] = acc / D
    psi = [0.0] + [-bt * g[j] for j in range(1, n + 1)]
    L = [np.exp(bt * (math.log(p.lambda1) - g[0]))] + [0.0] * n
    for j in range(1, n + 1):
        acc = 0.0
        for i in range(j):
            acc = acc + math.comb(j - 1, i) * L[i] * psi[j - i]
        L[j] = acc
    return L


def tmllp_laplace_derivatives(u: float, t: float, params: ProcessParams, n: int) -> list[float]:
    """``[L(u), L'(u), ..., L^(n)(u)]`` for the TMLLP Laplace transform.

    Built from ``log L = beta1 t (log lambda1 - log D)``, ``D = lambda1 - mu**a + (mu+u)**a``,
    with the Leibniz recursions for ``log D`` and ``exp``; all summands share
    a sign so there is no cancellation.
    """
    if params.mu + u <= 0:
        raise DomainError("derivatives at u=0 need mu > 0")
    return [float(v) for v in _laplace_derivs(float(u), t, params, n)]


def _moment_scale(t: float, p: ProcessParams) -> float:
    """Scale where the transform has dropped appreciably.

    The smaller of the e-folding point of L and the point where the
    base ratio reaches 1/2 (the latter matters for small beta1 t).
    """
    eps = p.lambda1 * math.expm1(min(1.0 / (p.beta1 * t), math.log(2.0)))
    if p.mu == 0:
        return eps ** (1.0 / p.alpha)
    ma = p.mu ** p.alpha
    return p.mu * math.expm1(math.log1p(eps / ma) / p.alpha)


@lru_cache(maxsize=4096)
def _fractional_moment_cached(q: float, t: float, params: ProcessParams, epsrel: float) -> float:
    p = params
    if q == 0:
        return 1.0
    if p.mu == 0:
        if q >= p.alpha:
            raise DomainError(f"E[M^q] is infinite for mu=0 and q={q} >= alpha={p.alpha}")
        r = q / p.alpha
        return math.exp(math.lgamma(1 - r) - math.lgamma(1 - q) + math.lgamma(p.beta1 * t + r)
                        - math.lgamma(p.beta1 * t) - r * math.log(p.lambda1))
    if float(q).is_integer():
        n = int(q)
        return (-1) ** n * tmllp_laplace_derivatives(0.0, t, p, n)[n]
    return _moment_by_quadrature(q, t, p, epsrel)


@lru_cache(maxsize=64)
def _gauss_nodes(kind: str, r: float, N: int):
    if kind == "jacobi":                     # weight s**(r-1) on [0, 1]
        return sc.roots_sh_jacobi(N, r, r)
    return np.polynomial.legendre.leggauss(N)


def _moment_gauss(q: float, t: float, p: ProcessParams, N: int) -> float:
    """Fixed-rule version of the moment integral (vectorised over nodes)."""
    n = int(math.floor(q)) + 1
    r = n - q
    u0 = _moment_scale(t, p)
    sgn = (-1) ** n
    xs, ws = _gauss_nodes("jacobi", r, N)
    head = float(ws @ (sgn * _laplace_derivs(u0 * xs, t, p, n)[n]))
    # tail in v = log s decays roughly like exp(-(alpha beta1 t + q) v)
    c = p.alpha * p.beta1 * t + q
    vmax = min(300.0, 45.0 / c + 5.0)
    n_panels = min(60, math.ceil(vmax / min(2.0, 2.0 / c)))
    width = vmax / n_panels
    edges = np.linspace(0.0, vmax, n_panels + 1)
    gx, gw = _gauss_nodes("legendre", 0.0, N)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    v = (mid + 0.5 * width * gx[None, :]).ravel()
    wv = np.tile(0.5 * width * gw, len(mid))
    tail = float(wv @ (sgn * _laplace_derivs(u0 * np.exp(v), t, p, n)[n] * np.exp(r * v)))
    return u0 ** r * (head + tail) / math.gamma(r)


def _moment_by_quadrature(q: float, t: float, p: ProcessParams, epsrel: float = 1e-12) -> float:
    prev = None
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for N in (40, 64, 96, 128):
            b = _moment_gauss(q, t, p, N)
            if not (math.isfinite(b) and b > 0):
                break
            if prev is not None and abs(prev - b) <= 20 * epsrel * b:
                return b
            prev = b
    return _moment_adaptive(q, t, p, epsrel)


def _moment_adaptive(q: float, t: float, p: ProcessParams, epsrel: float = 1e-12) -> float:
    n = int(math.floor(q)) + 1
    r = n - q                               # in (0, 1]
    u0 = _moment_scale(t, p)
    sgn = (-1) ** n

    def f(s):
        return sgn * tmllp_laplace_derivatives(u0 * s, t, p, n)[n]

    total = 0.0
    err = 0.0
    if r < 1:
        v, e = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(r - 1.0, 0.0),
                              epsabs=0.0, epsrel=epsrel, limit=200)
    else:
        v, e = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=epsrel, limit=200)
    total += v
    err += e
    # s = exp(v) on [1, inf): the algebraic tail becomes exponential decay
    edges = [0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 700.0]
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(lambda w: f(math.exp(w)) * math.exp(r * w), lo, hi,
                              epsabs=0.1 * epsrel * abs(total), epsrel=epsrel, limit=200)
        total += v
        err += e
    if not math.isfinite(total) or err > 1e-8 * abs(total):
        raise QuadratureError(f"moment quadrature for q={q}, t={t} failed (err={err:.3g})")
    return u0 ** r * total / math.gamma(r)


def tmllp_fractional_moment(q: float, t: float, params: ProcessParams, epsrel: float = 1e-12) -> float:
    """``E[M(t)**q]`` for ``q >= 0`` (cached per arguments)."""
    if q < 0 or t < 0:
        raise DomainError("q and t must be non-negative")
    if t == 0:
        return 1.0 if q == 0 else 0.0
    return _fractional_moment_cached(float(q), float(t), params, float(epsrel))


def tmllp_moment_asymptote(q: float, t: float, params: ProcessParams) -> float:
    """Large-t equivalent ``(alpha beta1 mu**(alpha-1) t / lambda1)**q``."""
    if q <= 0:
        raise DomainError("q must be positive")
    if params.mu == 0:
        raise DomainError("the moment asymptote is undefined for mu = 0")
    return (params.drift * t) ** q


def mc_tmllp_moment(q: float, t: float, params: ProcessParams, rng, n_samples: int) -> MomentEstimate:
    m = sample_tmllp_paths(params, [t], rng, n_samples)[:, 0]
    return MomentEstimate.from_samples(m ** q)


def tmllp_pdf(x, t: float, params: ProcessParams, ctrl: SeriesControl | None = None):
    """Density of ``M(t)`` from its Mittag-Leffler type series.

    The series is the Prabhakar function
    ``x**(a b1 t - 1) E^{b1 t}_{a, a b1 t}(-(lambda1 - mu**a) x**a)``
    scaled by ``lambda1**(b1 t) exp(-mu x)``.
    """
    params.require_pdf()
    p = params
    if t <= 0:
        raise DomainError("t must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    bt = p.beta1 * t
    z = -(p.lambda1 - p.mu ** p.alpha) * x ** p.alpha
    series = prabhakar_ml(p.alpha, p.alpha * bt, bt, z, ctrl)
    logpre = bt * math.log(p.lambda1) - p.mu * x + (p.alpha * bt - 1.0) * np.log(x)
    out = np.exp(logpre) * series
    return float(out) if out.ndim == 0 else out


def tmllp_levy_density(x, params: ProcessParams, ctrl: SeriesControl | None = None):
    """Levy density ``(alpha beta1 / x) exp(-mu x) E_{alpha,1}((mu**alpha - lambda1) x**alpha)``."""
    params.require_pdf()
    p = params
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    ml = mittag_leffler(p.alpha, 1.0, (p.mu ** p.alpha - p.lambda1) * x ** p.alpha, ctrl)
    out = p.alpha * p.beta1 / x * np.exp(-p.mu * x) * ml
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# fractional Poisson process
# ---------------------------------------------------------------------------

def fpp_pmf(n: int, t, lam: float, beta: float, ctrl: SeriesControl | None = None):
    """``P[N_beta(t) = n] = (lam t**beta)**n E^{n+1}_{beta, beta n + 1}(-lam t**beta)``."""
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    if not (0 < beta <= 1 and lam > 0):
        raise DomainError("need 0 < beta <= 1 and lam > 0")
    n = int(n)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    x = lam * t ** beta
    val = prabhakar_ml(beta, beta * n + 1.0, n + 1.0, -x, ctrl)
    with np.errstate(divide="ignore"):
        pre = np.where(x > 0, np.exp(n * np.log(np.where(x > 0, x, 1.0))), 1.0 if n == 0 else 0.0)
    out = pre * val
    return float(out) if out.ndim == 0 else out


def fpp_mean(t, lam, beta):
    return lam * np.asarray(t, dtype=float) ** beta / math.gamma(1 + beta)


def fpp_variance_beta_form(t, lam, beta):
    """Variance written with ``B(beta, 1/2) / 2**(2 beta - 1)``."""
    q1t = fpp_mean(t, lam, beta)
    return q1t * (1 + q1t * (beta * sc.beta(beta, 0.5) / 2 ** (2 * beta - 1) - 1))


def fpp_variance(t, lam, beta):
    """Variance written with ``1/Gamma(2 beta) - 1/(beta Gamma(beta)**2)``."""
    t = np.asarray(t, dtype=float)
    x = lam * t ** beta
    return fpp_mean(t, lam, beta) + x ** 2 / beta * (1 / math.gamma(2 * beta)
                                                     - 1 / (beta * math.gamma(beta) ** 2))


def fpp_covariance(s, t, lam, beta):
    """``Cov[N_beta(s), N_beta(t)]`` for ``0 < s <= t``."""
    q1 = lam / math.gamma(1 + beta)
    c1 = beta * q1 ** 2 * sc.beta(beta, 1 + beta)
    return (q1 * s ** beta + c1 * s ** (2 * beta)
            + q1 ** 2 * (beta * t ** (2 * beta) * incomplete_beta(beta, 1 + beta, s / t)
                         - (s * t) ** beta))


# ---------------------------------------------------------------------------
# moment tables and the TSTFNBP pmf series
# ---------------------------------------------------------------------------

class MomentTable:
    """Source of ``E[M(t)**(beta j)]`` shared across the series evaluations of one call.

    ``MomentTable.quadrature`` uses :func:`tmllp_fractional_moment` (cached);
    ``MomentTable.monte_carlo`` takes all powers from one batch of M(t) draws.
    """

    def __init__(self, t: float, params: ProcessParams, fn: Callable[[float], float], source: str):
        self.t = t
        self.params = params
        self._fn = fn
        self._cache: dict[int, float] = {}
        self.source = source

    @classmethod
    def quadrature(cls, t, params):
        return cls(t, params, lambda q: tmllp_fractional_moment(q, t, params), "quadrature")

    @classmethod
    def monte_carlo(cls, t, params, rng, n_samples=100_000):
        m = sample_tmllp_paths(params, [t], rng, n_samples)[:, 0]
        logm = np.log(m)
        return cls(t, params, lambda q: float(np.mean(np.exp(q * logm))), "monte_carlo")

    def __call__(self, j: int) -> float:
        """E[M(t)**(beta*j)]."""
        if j not in self._cache:
            self._cache[j] = self._fn(self.params.beta * j)
        return self._cache[j]


def _resolve_table(t, params, moment_source, rng, n_samples) -> MomentTable:
    if isinstance(moment_source, MomentTable):
        return moment_source
    if moment_source == "quadrature":
        return MomentTable.quadrature(t, params)
    if moment_source == "monte_carlo":
        if rng is None:
            raise DomainError("moment_source='monte_carlo' needs an rng")
        return MomentTable.monte_carlo(t, params, rng, n_samples)
    raise DomainError(f"unknown moment_source {moment_source!r}")


def _check_count_series(params: ProcessParams, x_abs: float, what: str) -> None:
    # sum_k x^k E[M^{beta k}]/Gamma(beta k + 1) behaves like E[E_beta(x M^beta)],
    # finite iff x**(1/beta) < mu (M has an exp(-mu y) tail)
    if params.mu == 0 or x_abs ** (1.0 / params.beta) >= params.mu:
        raise DivergenceError(
            f"{what} series diverges: |x|**(1/beta) = {x_abs ** (1.0 / params.beta):.6g} "
            f"must be below mu = {params.mu} (x = {x_abs:.6g})")


def _alternating_moment_series(log_terms_signs, ctrl: SeriesControl, what: str) -> float:
    """Sum terms produced lazily as (sign, log|term|) with the shared policy."""
    terms = []
    partial = 0.0
    max_log = -math.inf
    prev = math.inf
    run = 0
    for k in range(int(ctrl.max_terms)):
        sgn, lt = log_terms_signs(k)
        max_log = max(max_log, lt)
        term = sgn * math.exp(lt) if lt > -math.inf else 0.0
        terms.append(term)
        partial += term
        if lt <= prev and ctrl.small(term, partial):
            run += 1
            if run >= 2:
                break
        else:
            run = 0
        prev = lt
    else:
        raise TruncationError(f"{what} series did not converge within {ctrl.max_terms} terms")
    s = math.fsum(terms)
    if max_log > -math.inf:
        ratio = math.exp(max_log) / abs(s) if s != 0 else math.inf
        if ratio > _CANCELLATION_LIMIT:
            raise CancellationError(f"{what}: cancellation ratio {ratio:.3g} exceeds budget")
    return s


def tstfnbp_pmf(n: int, t: float, params: ProcessParams, ctrl: SeriesControl | None = None,
                moment_source="quadrature", rng=None, n_samples: int = 100_000) -> float:
    """``P[Q(t) = n]`` from the moment series

    ``(lam**n / n!) sum_k ((n+k)!/k!) (-lam)**k / Gamma(beta(n+k)+1) E[M(t)**(beta(n+k))]``.

    The series converges only when ``lam**(1/beta) < mu``; otherwise
    :class:`DivergenceError` is raised (use :func:`tstfnbp_pmf_by_conditioning`).
    Terms are summed exactly (``math.fsum``) so that moderate cancellation
    is harmless; a largest-term-to-sum ratio above 1e12 is reported as
    :class:`CancellationError`.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    params.require_pdf()
    if t <= 0:
        return 1.0 if n == 0 else 0.0
    n = int(n)
    p = params
    _check_count_series(p, p.lam, "pmf")
    table = _resolve_table(t, p, moment_source, rng, n_samples)
    loglam = math.log(p.lam)

    def term(k):
        m = table(n + k)
        if m <= 0:
            return (0.0, -math.inf)
        lt = (math.lgamma(n + k + 1) - math.lgamma(k + 1) + k * loglam
              - math.lgamma(p.beta * (n + k) + 1) + math.log(m))
        return ((-1.0) ** k, lt)

    s = _alternating_moment_series(term, ctrl, "pmf")
    return math.exp(n * loglam - math.lgamma(n + 1)) * s


def pmf_series_converges(params: ProcessParams) -> bool:
    return params.mu > 0 and params.lam ** (1.0 / params.beta) < params.mu


def tstfnbp_pmf_vector(n_max: int, t: float, params: ProcessParams, ctrl=None,
                       moment_source="quadrature", rng=None, n_samples=100_000,
                       eps: float = 1e-8, method: str = "series") -> PmfVector:
    """pmf for n = 0..n_max with the residual mass as ``tail_bound``.

    ``method`` is ``series`` (moment series), ``conditioning`` (quadrature
    of the FPP pmf against the M(t) density) or ``auto`` (series when it
    converges, conditioning otherwise).

    The residual ``1 - sum(probs)`` is checked against the Chebyshev-type
    bound ``E[Q(Q+1)] / ((n_max+1)(n_max+2))``; exceeding it by more than
    ``eps`` signals a numerical failure.
    """
    if method == "auto":
        method = "series" if pmf_series_converges(params) else "conditioning"
    if method == "series":
        table = _resolve_table(t, params, moment_source, rng, n_samples)
        probs = np.array([tstfnbp_pmf(n, t, params, ctrl, table) for n in range(n_max + 1)])
    elif method == "conditioning":
        probs = np.array([tstfnbp_pmf_by_conditioning(n, t, params, ctrl) for n in range(n_max + 1)])
    else:
        raise DomainError(f"unknown method {method!r}")
    if np.any(probs < -eps) or np.any(probs > 1 + eps):
        raise NumericalError("pmf value outside [0, 1]")
    probs = np.clip(probs, 0.0, 1.0)
    resid = 1.0 - math.fsum(probs)
    mean = tstfnbp_mean(t, params)
    second = tstfnbp_factorial_moment2(t, params) + 2 * mean
    bound = min(1.0, mean / (n_max + 1), second / ((n_max + 1) * (n_max + 2)))
    if resid < -eps or resid > bound + eps:
        raise NumericalError(
            f"pmf mass residual {resid:.3g} inconsistent with tail bound {bound:.3g}")
    return PmfVector(float(t), probs, max(0.0, resid))


def tstfnbp_pmf_by_conditioning(n: int, t: float, params: ProcessParams,
                                ctrl: SeriesControl | None = None) -> float:
    """``P[Q(t)=n] = int_0^inf P[N_beta(y)=n] f_M(y, t) dy`` by quadrature.

    Valid for every parameter set with ``lambda1 > mu**alpha``; used as an
    independent check of the moment series.
    """
    params.require_pdf()

    def f(y):
        return fpp_pmf(n, y, params.lam, params.beta, ctrl) * tmllp_pdf(y, t, params, ctrl)

    ymax = _density_cutoff(t, params)
    edges = [0.0, 1e-3, 0.1, 1.0] + [e for e in (10.0, 100.0) if e < ymax] + [ymax]
    edges = sorted(set(e for e in edges if e <= ymax))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-11, limit=200)
        total += v
    return total


def _density_cutoff(t: float, params: ProcessParams) -> float:
    """A point beyond which the M(t) density is below ~1e-16 of its bulk."""
    mean = params.drift * t
    sd = math.sqrt(max(tstfnbp_moment_variance_m(t, params), 0.0))
    # exponential tail exp(-mu y) dominates far out
    tail = 40.0 / params.mu if params.mu > 0 else 1e6
    return 2.0 * max(mean + 40 * sd, tail)


def tstfnbp_moment_variance_m(t, params) -> float:
    m1 = tmllp_fractional_moment(1.0, t, params)
    m2 = tmllp_fractional_moment(2.0, t, params)
    return m2 - m1 * m1


# ---------------------------------------------------------------------------
# special cases
# ---------------------------------------------------------------------------

def nb_pmf(n: int, t: float, lam: float, lambda1: float, beta1: float) -> float:
    """Negative binomial pmf with size ``beta1 t`` and success probability ``lam/(lambda1+lam)``."""
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    r = beta1 * t
    logp = (math.lgamma(n + r) - math.lgamma(n + 1) - math.lgamma(r)
            + r * math.log(lambda1 / (lambda1 + lam)) + n * math.log(lam / (lambda1 + lam)))
    return math.exp(logp)


def fnbp_pmf(n: int, t: float, lam: float, lambda1: float, beta1: float, beta: float,
             ctrl: SeriesControl | None = None) -> float:
    """FNBP pmf through the generalized Wright function ``2Psi1``.

    ``lam**n / (lambda1**(beta n) n! Gamma(beta1 t))
    * 2Psi1[-lam/lambda1**beta | (n+1,1), (beta1 t + beta n, beta); (1 + beta n, beta)]``;
    converges for ``lam < lambda1**beta``.
    """
    from .special import generalized_wright
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    n = int(n)
    bt = beta1 * t
    z = -lam / lambda1 ** beta
    psi = generalized_wright([(n + 1.0, 1.0), (bt + beta * n, beta)], [(1.0 + beta * n, beta)], z, ctrl)
    logpre = n * math.log(lam) - beta * n * math.log(lambda1) - math.lgamma(n + 1) - math.lgamma(bt)
    return math.exp(logpre) * psi


# ---------------------------------------------------------------------------
# mean, variance, covariance
# ---------------------------------------------------------------------------

def _consts(p: ProcessParams):
    q1 = p.lam / math.gamma(1 + p.beta)
    c1 = p.beta * q1 ** 2 * sc.beta(p.beta, 1 + p.beta)
    c2 = p.lam ** 2 / math.gamma(2 * p.beta + 1)
    return q1, c1, c2


def tstfnbp_mean(t: float, params: ProcessParams) -> float:
    q1, _, _ = _consts(params)
    return q1 * tmllp_fractional_moment(params.beta, t, params)


def tstfnbp_factorial_moment2(t: float, params: ProcessParams) -> float:
    """``E[Q(t)(Q(t)-1)] = 2 c2 E[M(t)**(2 beta)]``."""
    _, _, c2 = _consts(params)
    return 2 * c2 * tmllp_fractional_moment(2 * params.beta, t, params)


def tstfnbp_variance(t: float, params: ProcessParams) -> float:
    q1, _, c2 = _consts(params)
    m1 = tmllp_fractional_moment(params.beta, t, params)
    m2 = tmllp_fractional_moment(2 * params.beta, t, params)
    return q1 * m1 - q1 ** 2 * m1 ** 2 + 2 * c2 * m2


def dispersion_gap(t: float, params: ProcessParams) -> float:
    """``Var[Q(t)] - E[Q(t)] = 2 c2 E[M**(2 beta)] - q1**2 E[M**beta]**2``."""
    q1, _, c2 = _consts(params)
    m1 = tmllp_fractional_moment(params.beta, t, params)
    m2 = tmllp_fractional_moment(2 * params.beta, t, params)
    return 2 * c2 * m2 - q1 ** 2 * m1 ** 2


def _beta_term_samples(s, t, params, rng, n_samples):
    """Draws of the incomplete-beta expectation term and its control variates."""
    p = params
    q1, _, _ = _consts(p)
    b = p.beta
    if s == t:
        mt = sample_tmllp_paths(p, [t], rng, n_samples)[:, 0]
        ms = mt
    else:
        m = sample_tmllp_paths(p, [s, t], rng, n_samples)
        ms, mt = m[:, 0], m[:, 1]
    ratio = np.where(mt > 0, np.minimum(ms / np.where(mt > 0, mt, 1.0), 1.0), 1.0)
    y = q1 ** 2 * b * mt ** (2 * b) * incomplete_beta(b, 1 + b, ratio)
    controls = [(mt ** (2 * b), tmllp_fractional_moment(2 * b, t, p))]
    if s < t:
        controls.append((ms ** b * (mt - ms) ** b,
                         tmllp_fractional_moment(b, s, p) * tmllp_fractional_moment(b, t - s, p)))
        controls.append((ms ** (2 * b), tmllp_fractional_moment(2 * b, s, p)))
    return y, controls


def _control_variate_mean(y, controls) -> MomentEstimate:
    """Regression control-variate estimate of E[y] given controls with known means."""
    n = y.size
    X = np.column_stack([np.ones(n)] + [c - mu for c, mu in controls])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(n - X.shape[1], 1)
    se = math.sqrt(float(resid @ resid) / dof / n)
    return MomentEstimate(float(coef[0]), se, n)


def tstfnbp_covariance(s: float, t: float, params: ProcessParams, mc, n_samples: int = 100_000) -> MomentEstimate:
    """``Cov[Q(s), Q(t)]`` for ``0 < s <= t``.

    The three closed moment terms come from quadrature; the incomplete-beta
    expectation ``q1**2 beta E[M_t**(2b) B(b, 1+b; M_s/M_t)]`` is estimated
    from joint ``(M(s), M(t))`` draws with control variates whose means are
    known exactly (``M_t**(2b)``, ``M_s**b (M_t-M_s)**b``, ``M_s**(2b)``).
    """
    if not 0 < s <= t:
        raise DomainError("need 0 < s <= t")
    p = params
    q1, c1, _ = _consts(p)
    y, controls = _beta_term_samples(s, t, p, _gen(mc), n_samples)
    est = _control_variate_mean(y, controls)
    ms1 = tmllp_fractional_moment(p.beta, s, p)
    ms2 = tmllp_fractional_moment(2 * p.beta, s, p)
    mt1 = tmllp_fractional_moment(p.beta, t, p)
    value = q1 * ms1 + c1 * ms2 - q1 ** 2 * ms1 * mt1 + est.value
    return MomentEstimate(value, est.std_error, est.n_samples)


def correlation(s: float, t: float, params: ProcessParams, mc, n_samples: int = 100_000) -> MomentEstimate:
    cov = tstfnbp_covariance(s, t, params, mc, n_samples)
    denom = math.sqrt(tstfnbp_variance(s, params) * tstfnbp_variance(t, params))
    value = cov.value / denom
    if abs(value) > 1 + 5 * cov.std_error / denom:
        raise NumericalError(f"correlation estimate {value:.4g} violates |corr| <= 1")
    return MomentEstimate(value, cov.std_error / denom, cov.n_samples)


def lrd_slope(s: float, t_grid: Sequence[float], params: ProcessParams, mc: RngStream,
              n_samples: int = 100_000) -> LrdFit:
    """Least-squares slope of ``log Corr[Q(s), Q(t)]`` against ``log t``.

    All grid points share one set of joint TMLLP paths; each correlation is
    the control-variate covariance estimate over analytic standard deviations.
    The grid is sorted first, so the result does not depend on its order.
    """
    p = params
    grid = np.sort(np.asarray(t_grid, dtype=float))
    if grid[0] <= s or np.any(np.diff(grid) <= 0):
        raise DomainError("t_grid must be distinct and exceed s")
    if grid[-1] / grid[0] < 100 * (1 - 1e-12):
        raise DomainError("t_grid must span at least two decades")
    q1, c1, c2 = _consts(p)
    b = p.beta
    m = sample_tmllp_paths(p, np.concatenate(([s], grid)), _gen(mc), n_samples)
    ms = m[:, 0]
    ms1 = tmllp_fractional_moment(b, s, p)
    ms2 = tmllp_fractional_moment(2 * b, s, p)
    var_s = tstfnbp_variance(s, p)
    corrs, ses = [], []
    for j, t in enumerate(grid):
        mt = m[:, j + 1]
        y = q1 ** 2 * b * mt ** (2 * b) * incomplete_beta(b, 1 + b, np.minimum(ms / mt, 1.0))
        controls = [(mt ** (2 * b), tmllp_fractional_moment(2 * b, t, p)),
                    (ms ** b * (mt - ms) ** b, ms1 * tmllp_fractional_moment(b, t - s, p)),
                    (ms ** (2 * b), ms2)]
        est = _control_variate_mean(y, controls)
        cov = q1 * ms1 + c1 * ms2 - q1 ** 2 * ms1 * tmllp_fractional_moment(b, t, p) + est.value
        denom = math.sqrt(var_s * tstfnbp_variance(t, p))
        if cov <= 0:
            raise NumericalError(f"non-positive covariance estimate at t={t}; increase n_samples")
        corrs.append(float(cov / denom))
        ses.append(est.std_error / denom)
    x = np.log(grid)
    yv = np.log(corrs)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, yv, rcond=None)
    # OLS weights for the slope
    xc = x - x.mean()
    w = xc / (xc @ xc)
    se_mc = math.sqrt(float(np.sum((w * np.asarray(ses) / np.asarray(corrs)) ** 2)))
    resid = yv - A @ np.array([slope, intercept])
    se_fit = math.sqrt(float(resid @ resid) / max(len(x) - 2, 1) / float(xc @ xc))
    return LrdFit(float(slope), float(intercept), se_mc, se_fit, tuple(grid.tolist()), tuple(corrs))


# ---------------------------------------------------------------------------
# transforms of Q
# ---------------------------------------------------------------------------

def _count_transform(x: float, t: float, params: ProcessParams, ctrl, what: str) -> float:
    """``sum_l x**l E[M(t)**(l beta)] / Gamma(1 + beta l)`` for x <= 0."""
    ctrl = ctrl or DEFAULT_CONTROL
    if x == 0 or t == 0:
        return 1.0
    _check_count_series(params, abs(x), what)
    table = MomentTable.quadrature(t, params)
    lx = math.log(abs(x))
    sx = -1.0 if x < 0 else 1.0

    def term(l):
        m = table(l)
        return (sx ** l, l * lx + math.log(m) - math.lgamma(1 + params.beta * l))

    return _alternating_moment_series(term, ctrl, what)


def tstfnbp_laplace(u: float, t: float, params: ProcessParams, ctrl: SeriesControl | None = None) -> float:
    """``E[exp(-u Q(t))]``; the series converges when ``lam (1 - e^-u)`` < ``mu**beta``."""
    if u < 0:
        raise DomainError("u must be non-negative")
    return _count_transform(-params.lam * -math.expm1(-u), t, params, ctrl, "Laplace transform")


def tstfnbp_pgf(v: float, t: float, params: ProcessParams, ctrl: SeriesControl | None = None) -> float:
    """``E[v**Q(t)]`` for v in [0, 1]."""
    if not 0 <= v <= 1:
        raise DomainError("v must lie in [0, 1]")
    return _count_transform(-params.lam * (1.0 - v), t, params, ctrl, "pgf")


# ---------------------------------------------------------------------------
# Levy measure (beta = 1) and first passage
# ---------------------------------------------------------------------------

def levy_measure_beta1(k: int, params: ProcessParams, ctrl: SeriesControl | None = None) -> float:
    """Jump-size Levy measure ``D(k)`` of the beta = 1 process.

    ``alpha beta1 lam**k / k! sum_j (mu**a - lambda1)**j Gamma(a j + k)
    / (Gamma(a j + 1) (lam + mu)**(a j + k))``; the j-series converges for
    ``lambda1 - mu**a < (lam + mu)**a``.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    p = params
    if k < 1 or int(k) != k:
        raise DomainError("k must be a positive integer")
    if p.beta != 1.0:
        raise DomainError("the Levy measure formula applies to beta = 1 only")
    p.require_pdf()
    k = int(k)
    c = p.mu ** p.alpha - p.lambda1           # <= 0
    lam_mu = p.lam + p.mu
    if abs(c) >= lam_mu ** p.alpha:
        raise DivergenceError(
            f"Levy measure series diverges: |mu^a - lambda1|={abs(c):.4g} >= (lam+mu)^a={lam_mu ** p.alpha:.4g}")
    a = p.alpha
    lc = math.log(abs(c)) if c != 0 else -math.inf
    llm = math.log(lam_mu)

    # terms are scaled by the j = 0 term Gamma(k) / (lam+mu)**k so large k cannot overflow
    lead = math.lgamma(k) - k * llm

    def log_term(j):
        if j > 0 and c == 0:
            return (0.0, -math.inf)
        lt = ((j * lc if j else 0.0) + math.lgamma(a * j + k) - math.lgamma(a * j + 1)
              - (a * j + k) * llm) - lead
        return ((-1.0) ** j, lt)

    def mp_term(j):
        import mpmath
        am = mpmath.mpf(a)
        return (mpmath.mpf(c) ** j * mpmath.gamma(am * j + k) * mpmath.rgamma(am * j + 1)
                / mpmath.mpf(lam_mu) ** (am * j + k) / mpmath.exp(lead))

    s = _robust_scalar_sum(log_term, mp_term, ctrl)
    return a * p.beta1 * math.exp(k * math.log(p.lam) - math.lgamma(k + 1) + lead) * s


def levy_measure_by_quadrature(k: int, params: ProcessParams) -> float:
    """``int_0^inf Poisson(k; lam y) pi(y) dy`` with the TMLLP Levy density."""
    p = params

    def f(y):
        return math.exp(k * math.log(p.lam * y) - p.lam * y - math.lgamma(k + 1)) * tmllp_levy_density(y, p)

    return _levy_quad(f, p)


def _levy_quad(f, p: ProcessParams) -> float:
    ymax = 800.0 / (p.lam + p.mu)
    edges = [0.0, 1e-6, 1e-3, 0.1, 1.0, 10.0, 100.0, ymax]
    edges = sorted(set(e for e in edges if e <= ymax))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=400)
        total += v
    return total


def levy_total_mass_by_quadrature(params: ProcessParams) -> float:
    """``int_0^inf (1 - exp(-lam y)) pi(y) dy``: total mass of the jump measure."""
    p = params
    return _levy_quad(lambda y: -math.expm1(-p.lam * y) * tmllp_levy_density(y, p), p)


def first_passage(k: int, t: float, params: ProcessParams, ctrl: SeriesControl | None = None,
                  mode: str = "survival", return_error: bool = False):
    """Distribution of the first time ``Q`` reaches level ``k``.

    ``survival`` is ``sum_{n<k} P[Q(t)=n]``, ``cdf`` its complement and
    ``density`` minus the t-derivative of the survival function, taken by
    central differences with one Richardson step (``h = max(1e-4, 1e-3 t)``).
    With ``return_error=True`` the density comes with its discretisation estimate.
    """
    if k < 1 or int(k) != k:
        raise DomainError("k must be a positive integer")
    if t < 0:
        raise DomainError("t must be non-negative")

    def survival(tt):
        if tt == 0:
            return 1.0
        table = MomentTable.quadrature(tt, params)
        return math.fsum(tstfnbp_pmf(n, tt, params, ctrl, table) for n in range(int(k)))

    if mode == "survival":
        return survival(t)
    if mode == "cdf":
        return 1.0 - survival(t)
    if mode != "density":
        raise DomainError(f"unknown mode {mode!r}")
    if t <= 0:
        raise DomainError("density needs t > 0")
    h = min(max(1e-4, 1e-3 * t), t / 4)
    d1 = (survival(t + h) - survival(t - h)) / (2 * h)
    d2 = (survival(t + h / 2) - survival(t - h / 2)) / h
    rich = (4 * d2 - d1) / 3
    err = abs(rich - d2)
    return (-rich, err) if return_error else -rich
