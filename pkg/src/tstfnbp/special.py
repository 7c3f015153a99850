"""Special functions: Mittag-Leffler family, generalized Wright, incomplete beta,
partial ordinary Bell polynomials.

All series evaluators share one policy, carried by :class:`SeriesControl`.
A sum is accepted only after two successive terms fall below
``abs_tol + rel_tol * |partial sum|`` past the peak term; otherwise
:class:`~tstfnbp.errors.TruncationError` is raised.

When an alternating series cancels badly (largest term much bigger than the
sum) the double-precision result is discarded and the value is recomputed
either from an integral representation (Mittag-Leffler, negative argument,
``0 < alpha < 1``) or by extended-precision summation with :mod:`mpmath`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate, special as sc

from .errors import DivergenceError, DomainError, PoleError, TruncationError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "mittag_leffler",
    "prabhakar_ml",
    "generalized_wright",
    "incomplete_beta",
    "partial_bell_ordinary",
    "digamma",
    "log_gamma",
]

# Ratio max|term| / |sum| above which a double-precision sum is not trusted.
# 1e4 keeps roughly 12 good digits.
CANCELLATION_SWITCH = 1e4
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for infinite series."""

    max_terms: int = 20000
    abs_tol: float = 0.0
    rel_tol: float = 1e-15

    def __post_init__(self):
        if int(self.max_terms) < 1:
            raise DomainError("max_terms must be >= 1")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("at least one of abs_tol, rel_tol must be positive")

    def small(self, term, partial) -> bool:
        return abs(term) <= self.abs_tol + self.rel_tol * abs(partial)


DEFAULT_CONTROL = SeriesControl()

digamma = sc.digamma
log_gamma = sc.gammaln


# ---------------------------------------------------------------------------
# generic scalar machinery
# ---------------------------------------------------------------------------

def _float_pass(log_term: Callable[[int], tuple[float, float]], ctrl: SeriesControl):
    """Sum a series in double precision from (sign, log|term|) pairs.

    Returns ``(sum, max_log_term, converged)``.  ``sum`` is None when a term
    overflows, in which case only the peak estimate is meaningful.
    """
    terms = []
    max_log = -math.inf
    prev_log = math.inf
    small_run = 0
    partial = 0.0
    overflow = False
    for k in range(int(ctrl.max_terms)):
        sgn, lt = log_term(k)
        if lt > max_log:
            max_log = lt
        if lt > _LOG_OVERFLOW:
            overflow = True
            term = 0.0
        else:
            term = sgn * math.exp(lt) if sgn != 0 else 0.0
            terms.append(term)
            partial += term
        decreasing = lt <= prev_log
        prev_log = lt
        if overflow:
            # only the peak is needed now; stop once far past it
            if decreasing and lt < max_log - 80.0:
                return None, max_log, False
            continue
        if decreasing and ctrl.small(term, partial):
            small_run += 1
            if small_run >= 2:
                return math.fsum(terms), max_log, True
        else:
            small_run = 0
    return (None if overflow else math.fsum(terms)), max_log, False


def _mp_pass(mp_term: Callable[[int], "mpmath.mpf"], ctrl: SeriesControl, dps: int):
    """Sum a series at ``dps`` decimal digits.  Returns (sum, max|term|)."""
    with mpmath.workdps(dps):
        tol = mpmath.mpf(10) ** (-dps + 5)
        s = mpmath.mpf(0)
        max_abs = mpmath.mpf(0)
        prev = None
        small_run = 0
        for k in range(int(ctrl.max_terms)):
            t = mp_term(k)
            s += t
            at = abs(t)
            if at > max_abs:
                max_abs = at
            decreasing = prev is None or at <= prev
            prev = at
            thresh = max(mpmath.mpf(ctrl.abs_tol), mpmath.mpf(ctrl.rel_tol) * abs(s))
            if decreasing and (at <= thresh or at <= tol * abs(s)):
                small_run += 1
                if small_run >= 2:
                    return s, max_abs
            else:
                small_run = 0
    raise TruncationError(
        f"extended-precision series did not converge within {ctrl.max_terms} terms"
    )


def _extended_sum(mp_term, ctrl: SeriesControl, max_log: float) -> float:
    """Extended-precision summation with the working precision sized from the
    largest term and re-checked against the computed sum."""
    dps = 30 + int(math.ceil(max(max_log, 0.0) / math.log(10)))
    for _ in range(6):
        s, max_abs = _mp_pass(mp_term, ctrl, dps)
        if s == 0:
            dps *= 2
            continue
        lost = float(mpmath.log10(max_abs / abs(s))) if max_abs > 0 else 0.0
        if lost + 20 <= dps:
            return float(s)
        dps = int(lost) + 40
    raise TruncationError("extended-precision summation could not resolve cancellation")


def _robust_scalar_sum(log_term, mp_term, ctrl: SeriesControl) -> float:
    s, max_log, converged = _float_pass(log_term, ctrl)
    if converged and s is not None and s != 0.0:
        if max_log - math.log(abs(s)) <= math.log(CANCELLATION_SWITCH):
            return s
    elif converged and s == 0.0 and max_log == -math.inf:
        return 0.0
    if not converged and s is not None:
        # double pass hit max_terms without overflow: the series itself is too long
        raise TruncationError(f"series did not converge within {ctrl.max_terms} terms")
    return _extended_sum(mp_term, ctrl, max_log)


# ---------------------------------------------------------------------------
# Mittag-Leffler family
# ---------------------------------------------------------------------------

def _check_positive(**kw):
    for name, v in kw.items():
        if not (v > 0) or not math.isfinite(v):
            raise DomainError(f"{name} must be a positive finite real, got {v!r}")


@lru_cache(maxsize=256)
def _prabhakar_coeffs(alpha: float, beta: float, rho: float, K: int) -> np.ndarray:
    k = np.arange(K, dtype=float)
    return (sc.gammaln(rho + k) - sc.gammaln(rho) - sc.gammaln(k + 1.0)
            - sc.gammaln(alpha * k + beta))


def _ml_integral(alpha: float, beta: float, x: float) -> float:
    """E_{alpha,beta}(-x) for x > 0, 0 < alpha < 1, beta < 1 + alpha, via

        (1/(alpha pi)) int_0^inf r^{(1-beta)/alpha} exp(-r^{1/alpha})
            (r sin(pi(1-beta)) + x sin(pi(1-beta+alpha))) / (r^2 + 2 r x cos(pi alpha) + x^2) dr
    """
    s1 = math.sin(math.pi * (1.0 - beta))
    s2 = math.sin(math.pi * (1.0 - beta + alpha))
    c = math.cos(math.pi * alpha)
    p = (1.0 - beta) / alpha
    inv = 1.0 / alpha

    def f(r):
        return r ** p * math.exp(-r ** inv) * (r * s1 + x * s2) / (r * r + 2.0 * r * x * c + x * x)

    rmax = 745.0 ** alpha
    pts = sorted(q for q in {1.0, -x * c, x} if 0.0 < q < rmax)
    val, err = integrate.quad(f, 0.0, rmax, epsabs=0.0, epsrel=1e-13, limit=400,
                              points=pts or None)
    return val / (alpha * math.pi)


def _prabhakar_integral(alpha: float, beta: float, rho: float, x: float) -> float | None:
    """E^rho_{alpha,beta}(-x) for x > 0, 0 < alpha < 1, alpha rho - beta > -1.

    Inverse Laplace transform of s^(alpha rho - beta) / (s^alpha + x)^rho with
    the Bromwich contour collapsed onto the negative axis (no poles on the
    principal sheet when alpha < 1). Returns None when quadpack cannot vouch
    for the result, so the caller can fall back to the series.

        -(1/pi) int_0^inf e^{-r} r^(alpha rho - beta)
              Im[e^{i pi (alpha rho - beta)} (r^alpha e^{i pi alpha} + x)^(-rho)] dr
    """
    g = alpha * rho - beta
    rot = cmath.exp(1j * math.pi * g)
    w = cmath.exp(1j * math.pi * alpha)

    def f(r):
        return math.exp(-r) * r ** g * (rot * (r ** alpha * w + x) ** (-rho)).imag

    knee = x ** (1.0 / alpha)
    pts = [knee] if knee < 700.0 else None
    # full_output keeps quadpack's roundoff chatter quiet; the estimate is checked below
    val, err, *_ = integrate.quad(f, 0.0, 745.0, epsabs=0.0, epsrel=1e-12, limit=400,
                                  points=pts, full_output=1)
    if not err <= 1e-9 * abs(val):
        return None
    return -val / math.pi


def _prabhakar_scalar(alpha, beta, rho, z, ctrl):
    if z < 0 and alpha < 1.0:
        if rho == 1.0 and beta < 1.0 + alpha:
            return _ml_integral(alpha, beta, -z)
        if rho == 1.0 and z <= -1.0:
            # E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z; the first term is O(1/|z|)
            # against the second, so stepping b down costs no digits
            return (_prabhakar_scalar(alpha, beta - alpha, 1.0, z, ctrl) - sc.rgamma(beta - alpha)) / z
        if alpha * rho - beta > -1.0:
            val = _prabhakar_integral(alpha, beta, rho, -z)
            if val is not None:
                return val

    lz = math.log(abs(z)) if z != 0 else -math.inf
    sz = 1.0 if z >= 0 else -1.0
    lg_rho = math.lgamma(rho)

    def log_term(k):
        lt = (math.lgamma(rho + k) - lg_rho - math.lgamma(k + 1.0)
              - math.lgamma(alpha * k + beta) + (k * lz if k else 0.0))
        return (sz ** k, lt)

    state = {}

    def mp_term(k):
        # rising-factorial / factorial recurrence carried between calls
        if k == 0:
            state["a"], state["b"], state["r"] = (mpmath.mpf(alpha), mpmath.mpf(beta),
                                                  mpmath.mpf(rho))
            state["z"] = mpmath.mpf(z)
            state["c"] = mpmath.mpf(1)
        else:
            state["c"] = state["c"] * (state["r"] + k - 1) / k * state["z"]
        return state["c"] * mpmath.rgamma(state["a"] * k + state["b"])

    return _robust_scalar_sum(log_term, mp_term, ctrl)


def prabhakar_ml(alpha, beta, rho, z, ctrl: SeriesControl | None = None):
    """Three-parameter (Prabhakar) Mittag-Leffler function.

    ``sum_k (rho)_k z^k / (k! Gamma(alpha k + beta))`` for real ``z``, scalar
    or array.  Arrays are summed in one vectorised double-precision pass;
    entries that cancel badly or do not converge are redone one at a time by
    the robust scalar route.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    _check_positive(alpha=alpha, beta=beta, rho=rho)
    alpha, beta, rho = float(alpha), float(beta), float(rho)
    z_arr = np.asarray(z, dtype=float)
    flat = z_arr.ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError("z must be finite")
    out = np.empty_like(flat)
    todo = np.arange(flat.size)

    K = 32
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lz_all = np.log(np.abs(flat))
    while todo.size and K <= ctrl.max_terms:
        c = _prabhakar_coeffs(alpha, beta, rho, K)
        lz = lz_all[todo]
        ks = np.arange(K, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            logt = c[None, :] + np.where(ks[None, :] == 0, 0.0, ks[None, :] * lz[:, None])
            mag = np.exp(np.minimum(logt, _LOG_OVERFLOW))
        neg = flat[todo] < 0
        sign = np.where(neg[:, None] & (np.arange(K)[None, :] % 2 == 1), -1.0, 1.0)
        terms = sign * mag
        s = terms.sum(axis=1)
        thresh = ctrl.abs_tol + ctrl.rel_tol * np.abs(s)
        decreasing = (logt[:, -1] <= logt[:, -2]) & (logt[:, -2] <= logt[:, -3])
        converged = (mag[:, -1] <= thresh) & (mag[:, -2] <= thresh) & decreasing
        max_log = logt.max(axis=1)
        overflow = max_log > _LOG_OVERFLOW
        with np.errstate(divide="ignore"):
            ratio_ok = (max_log - np.log(np.abs(s))) <= math.log(CANCELLATION_SWITCH)
        good = converged & ~overflow & ratio_ok
        out[todo[good]] = s[good]
        # cancelling / overflowing entries go to the scalar route straight away
        hard = (converged & ~ratio_ok) | overflow
        for i in todo[hard]:
            out[i] = _prabhakar_scalar(alpha, beta, rho, float(flat[i]), ctrl)
        todo = todo[~(good | hard)]
        K *= 2
    for i in todo:
        out[i] = _prabhakar_scalar(alpha, beta, rho, float(flat[i]), ctrl)
    res = out.reshape(z_arr.shape)
    return float(res) if res.ndim == 0 else res


def mittag_leffler(alpha, beta, z, ctrl: SeriesControl | None = None):
    """Two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)`` for real z.

    For negative ``z`` with ``0 < alpha < 1`` and heavy cancellation the
    value comes from the Laplace-type integral representation, which is
    accurate to about 1e-13 relative on ``z`` in [-1e3, -1].
    """
    return prabhakar_ml(alpha, beta, 1.0, z, ctrl)


# ---------------------------------------------------------------------------
# generalized Wright function
# ---------------------------------------------------------------------------

def _signed_lgamma(x: float) -> tuple[float, float]:
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"gamma pole at argument {x}")
    return float(sc.gammasgn(x)), math.lgamma(x)


def generalized_wright(upper: Sequence[tuple[float, float]],
                       lower: Sequence[tuple[float, float]],
                       z: float, ctrl: SeriesControl | None = None) -> float:
    """Generalized Wright function ``pPsi_q`` for real arguments.

    ``upper`` holds the (a_i, b_i) pairs of the numerator gammas, ``lower``
    the (c_j, d_j) pairs of the denominator.  Zero slopes are rejected.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    upper = [(float(a), float(b)) for a, b in upper]
    lower = [(float(a), float(b)) for a, b in lower]
    for a, b in upper + lower:
        if b == 0.0:
            raise DomainError("zero gamma slope (b_j = 0) is not supported")
    z = float(z)
    # convergence: Delta = sum d_j - sum b_i
    delta = sum(d for _, d in lower) - sum(b for _, b in upper)
    if delta < -1:
        if z != 0:
            raise DivergenceError(f"Wright series has zero radius (Delta={delta:.3g} < -1)")
    elif delta == -1:
        radius = (math.prod(abs(b) ** (-b) for _, b in upper)
                  * math.prod(abs(d) ** d for _, d in lower))
        if abs(z) >= radius:
            raise DivergenceError(f"|z|={abs(z):.6g} outside radius {radius:.6g}")

    lz = math.log(abs(z)) if z != 0 else -math.inf
    sz = 1.0 if z >= 0 else -1.0

    def log_term(k):
        sgn = sz ** k
        lt = -math.lgamma(k + 1.0) + (k * lz if k else 0.0)
        for a, b in upper:
            s, lg = _signed_lgamma(a + b * k)
            sgn *= s
            lt += lg
        for a, b in lower:
            x = a + b * k
            if x <= 0 and x == math.floor(x):
                return (0.0, -math.inf)  # 1/Gamma vanishes at poles
            s, lg = _signed_lgamma(x)
            sgn *= s
            lt -= lg
        return (sgn, lt)

    mp_up = lower_mp = None

    def mp_term(k):
        nonlocal mp_up, lower_mp
        if mp_up is None:
            mp_up = [(mpmath.mpf(a), mpmath.mpf(b)) for a, b in upper]
            lower_mp = [(mpmath.mpf(a), mpmath.mpf(b)) for a, b in lower]
        t = mpmath.mpf(z) ** k / mpmath.factorial(k)
        for a, b in mp_up:
            t *= mpmath.gamma(a + b * k)
        for a, b in lower_mp:
            t *= mpmath.rgamma(a + b * k)
        return t

    return _robust_scalar_sum(log_term, mp_term, ctrl)


# ---------------------------------------------------------------------------
# incomplete beta, Bell polynomials
# ---------------------------------------------------------------------------

def incomplete_beta(m, n, x):
    """Unregularized incomplete beta ``B(m, n; x) = int_0^x t^{m-1}(1-t)^{n-1} dt``."""
    if not (m > 0 and n > 0):
        raise DomainError("m and n must be positive")
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr < 0) | (x_arr > 1)) or not np.all(np.isfinite(x_arr)):
        raise DomainError("x must lie in [0, 1]")
    res = sc.betainc(m, n, x_arr) * sc.beta(m, n)
    return float(res) if res.ndim == 0 else res


def partial_bell_ordinary(coeffs: Sequence[float], j: int, i: int) -> float:
    """Partial ordinary Bell polynomial ``B^_{j,i}(a_1, ..., a_{j-i+1})``.

    Sum over compositions of ``j`` into ``i`` positive ordered parts of the
    product of the corresponding ``a``'s.  ``coeffs[0]`` is ``a_1``.
    """
    j, i = int(j), int(i)
    if j < 0 or i < 0:
        raise DomainError("j and i must be non-negative")
    if i > j:
        raise DomainError(f"i={i} exceeds j={j}")
    need = j - i + 1 if (j or i) else 0
    a = [float(c) for c in coeffs]
    if len(a) < need and i > 0:
        raise DomainError(f"need {need} coefficients, got {len(a)}")

    @lru_cache(maxsize=None)
    def rec(jj, ii):
        if ii == 0:
            return 1.0 if jj == 0 else 0.0
        if jj < ii:
            return 0.0
        return sum(a[m - 1] * rec(jj - m, ii - 1) for m in range(1, jj - ii + 2))

    return rec(j, i)
