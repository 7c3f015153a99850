"""Acceptance checks shared by ``tstfnbp verify`` and the test-suite.

Every check returns a :class:`CheckResult`; ``rows`` holds the individual
comparisons so a failure can be diagnosed from the JSON report alone.
Monte Carlo comparisons use 3 standard errors throughout.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from dataclasses import dataclass, field, asdict
from typing import Callable

import mpmath
import numpy as np

from . import analytics as an
from . import pde
from .samplers import (ProcessParams, RngStream, sample_gamma_increment, sample_inverse_stable,
                       sample_tempered_stable_increment, sample_tmllp_paths, sample_tstfnbp_paths)
from .special import (generalized_wright, incomplete_beta, mittag_leffler, partial_bell_ordinary,
                      prabhakar_ml)

__all__ = ["CheckResult", "CHECKS", "run_checks", "ml_series_oracle"]

Z_LIMIT = 3.0

DEFAULT = ProcessParams(alpha=0.5, beta=0.5, beta1=1.0, lambda1=2.0, mu=0.5, lam=1.0)
# pmf series need lam**(1/beta) < mu
PMF_SET = ProcessParams(alpha=0.5, beta=0.5, beta1=1.0, lambda1=2.0, mu=0.5, lam=0.3)
SUBORD_SETS = (
    ProcessParams(alpha=0.5, beta=1.0, beta1=4.0, lambda1=1.5, mu=1.0, lam=0.5),
    ProcessParams(alpha=0.5, beta=0.5, beta1=4.0, lambda1=1.5, mu=1.0, lam=0.5),
)
FPT_SET = ProcessParams(alpha=0.5, beta=0.5, beta1=10.0, lambda1=1.2, mu=1.0, lam=0.6)
LEVY_SET = ProcessParams(alpha=0.5, beta=1.0, beta1=1.0, lambda1=1.5, mu=1.0, lam=1.0)
ASYMPTOTE_SET = ProcessParams(alpha=0.5, beta=0.5, beta1=1.0, lambda1=2.0, mu=1.0, lam=1.0)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    summary: str
    seconds: float = 0.0
    rows: list = field(default_factory=list)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return asdict(self)


def _z(est, se, target):
    return abs(est - target) / se if se > 0 else (0.0 if est == target else math.inf)


def _mc_row(label, values, target):
    values = np.asarray(values, dtype=float)
    m = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size))
    z = _z(m, se, target)
    return {"case": label, "mc": m, "se": se, "exact": float(target), "z": z, "ok": z <= Z_LIMIT}


def _freq_row(label, hits, n, p):
    f = hits / n
    se = math.sqrt(max(p * (1 - p), 1e-300) / n)
    z = _z(f, se, p)
    return {"case": label, "mc": f, "se": se, "exact": float(p), "z": z, "ok": z <= Z_LIMIT}


# ---------------------------------------------------------------------------

def check_transforms(seed: int = 42, n: int = 100_000) -> CheckResult:
    """Empirical Laplace transforms of the four subordinator samplers."""
    p = DEFAULT
    rows = []
    us = (0.1, 0.5, 1.0, 2.0, 5.0)
    root = RngStream(seed, 1)
    for i, t in enumerate((0.5, 1.0, 2.0)):
        draws = {
            "gamma": (sample_gamma_increment(p.lambda1, p.beta1, t, root.child(4 * i), n),
                      lambda u: (p.lambda1 / (p.lambda1 + u)) ** (p.beta1 * t)),
            "tempered_stable": (sample_tempered_stable_increment(p.alpha, p.mu, t, root.child(4 * i + 1), n),
                                lambda u: math.exp(-t * ((p.mu + u) ** p.alpha - p.mu ** p.alpha))),
            "tmllp": (sample_tmllp_paths(p, [t], root.child(4 * i + 2), n)[:, 0],
                      lambda u: an.tmllp_laplace(u, t, p)),
            "inverse_stable": (sample_inverse_stable(p.beta, t, root.child(4 * i + 3), n),
                               lambda u: mittag_leffler(p.beta, 1.0, -u * t ** p.beta)),
        }
        for name, (x, lt) in draws.items():
            for u in us:
                rows.append(_mc_row(f"{name} t={t} u={u}", np.exp(-u * x), lt(u)))
    worst = max(r["z"] for r in rows)
    return CheckResult(1, "transform agreement", all(r["ok"] for r in rows),
                       f"{len(rows)} comparisons, max |z| = {worst:.2f}", rows=rows)


def check_subordination(seed: int = 42, n: int = 100_000, t: float = 2.0) -> CheckResult:
    """Moment-series pmf against Monte Carlo frequencies of Q(t)."""
    rows = []
    for j, p in enumerate(SUBORD_SETS):
        q = sample_tstfnbp_paths(p, [t], RngStream(seed, 2, (j,)), n)[:, 0]
        table = an.MomentTable.quadrature(t, p)
        for k in range(11):
            pk = an.tstfnbp_pmf(k, t, p, None, table)
            rows.append(_freq_row(f"beta={p.beta} n={k}", int(np.sum(q == k)), n, pk))
    worst = max(r["z"] for r in rows)
    return CheckResult(2, "subordination identity", all(r["ok"] for r in rows),
                       f"n=0..10 at beta in {{1, 0.5}}, max |z| = {worst:.2f}", rows=rows)


def check_special_collapse(seed: int = 42, n: int = 100_000) -> CheckResult:
    """Poisson on a gamma clock vs the negative binomial; FNBP at beta=1 vs NB."""
    lam, lambda1, beta1, t = 1.0, 2.0, 1.0, 1.0
    gen = RngStream(seed, 3).generator
    g = sample_gamma_increment(lambda1, beta1, t, gen, n)
    counts = gen.poisson(lam * g)
    rows = []
    for k in range(11):
        rows.append(_freq_row(f"gamma-Poisson n={k}", int(np.sum(counts == k)), n,
                              an.nb_pmf(k, t, lam, lambda1, beta1)))
    for k in range(11):
        a = an.fnbp_pmf(k, t, lam, lambda1, beta1, 1.0)
        b = an.nb_pmf(k, t, lam, lambda1, beta1)
        rows.append({"case": f"fnbp(beta=1) n={k}", "value": a, "exact": b,
                     "abs_err": abs(a - b), "ok": abs(a - b) <= 1e-8})
    return CheckResult(3, "special-case collapse", all(r["ok"] for r in rows),
                       "gamma-Poisson frequencies within 3 s.e.; FNBP(beta=1) = NB to 1e-8", rows=rows)


def check_asymptotics() -> CheckResult:
    p = ASYMPTOTE_SET
    rows = []
    for q in (0.3, 0.5, 1.0, 1.7):
        r = an.tmllp_fractional_moment(q, 1e3, p) / an.tmllp_moment_asymptote(q, 1e3, p)
        rows.append({"case": f"q={q} t=1000", "ratio": r, "ok": abs(r - 1) <= 0.02})
    for t in (0.1, 1.0, 10.0, 100.0, 1000.0):
        m = an.tmllp_fractional_moment(1.0, t, p)
        a = an.tmllp_moment_asymptote(1.0, t, p)
        rows.append({"case": f"q=1 t={t}", "rel_err": abs(m / a - 1), "ok": abs(m / a - 1) <= 1e-10})
    return CheckResult(4, "fractional-moment asymptotics", all(r["ok"] for r in rows),
                       "ratios at t=1000 within 2%; q=1 exact", rows=rows)


def _cov_draws(x, y):
    d = (x - x.mean()) * (y - y.mean())
    return float(d.sum() / (x.size - 1)), float(d.std(ddof=1) / math.sqrt(x.size))


def check_moments(seed: int = 42, n: int = 100_000) -> CheckResult:
    p = DEFAULT
    rows = []
    q = sample_tstfnbp_paths(p, [1.0, 2.0], RngStream(seed, 5), n)
    q1, q2 = q[:, 0].astype(float), q[:, 1].astype(float)
    rows.append(_mc_row("mean t=1", q1, an.tstfnbp_mean(1.0, p)))
    var_mc = float(q1.var(ddof=1))
    se_var = math.sqrt(max(float(np.mean((q1 - q1.mean()) ** 4)) - var_mc ** 2, 0.0) / n)
    v = an.tstfnbp_variance(1.0, p)
    rows.append({"case": "variance t=1", "mc": var_mc, "se": se_var, "exact": v,
                 "z": _z(var_mc, se_var, v), "ok": _z(var_mc, se_var, v) <= Z_LIMIT})
    cov_mc, se_mc = _cov_draws(q1, q2)
    est = an.tstfnbp_covariance(1.0, 2.0, p, RngStream(seed, 5, (1,)), n)
    se = math.hypot(se_mc, est.std_error)
    rows.append({"case": "cov(1,2)", "mc": cov_mc, "se": se, "exact": est.value,
                 "z": _z(cov_mc, se, est.value), "ok": _z(cov_mc, se, est.value) <= Z_LIMIT})
    same = an.tstfnbp_covariance(1.0, 1.0, p, RngStream(seed, 5, (2,)), n)
    gap = abs(same.value - v)
    rows.append({"case": "cov(1,1) vs var(1)", "cov": same.value, "var": v, "se": same.std_error,
                 "ok": gap <= Z_LIMIT * same.std_error + 1e-10 * abs(v)})
    return CheckResult(5, "moment formulas", all(r["ok"] for r in rows),
                       "mean, variance, cov(1,2), cov(t,t)=var(t)", rows=rows)


def check_overdispersion() -> CheckResult:
    rows = []
    for a in (0.3, 0.5, 0.8):
        for b in (0.3, 0.6, 0.9):
            for mu in (0.2, 1.0, 3.0):
                p = DEFAULT.with_(alpha=a, beta=b, mu=mu)
                gap = an.dispersion_gap(1.0, p)
                rows.append({"case": f"alpha={a} beta={b} mu={mu}", "gap": gap, "ok": gap > 0})
    for b in (0.5, 0.8):
        p = DEFAULT.with_(beta=b)
        ts = np.array([1e2, 1e3, 1e4])
        gaps = np.array([an.dispersion_gap(t, p) for t in ts])
        slope = float(np.polyfit(np.log(ts), np.log(gaps), 1)[0])
        rows.append({"case": f"log-gap slope beta={b}", "slope": slope, "target": 2 * b,
                     "ok": abs(slope - 2 * b) <= 0.05 * 2 * b})
    return CheckResult(6, "overdispersion", all(r["ok"] for r in rows),
                       "gap > 0 on 27-point grid; slope 2*beta within 5%", rows=rows)


def check_lrd(seed: int = 42, n: int = 100_000) -> CheckResult:
    rows = []
    grid = [10.0, 30.0, 100.0, 300.0, 1000.0]
    for b, tol in ((0.5, 0.1), (0.8, 0.15)):
        fit = an.lrd_slope(1.0, grid, DEFAULT.with_(beta=b), RngStream(seed, 7, (int(b * 10),)), n)
        rows.append({"case": f"beta={b}", "slope": fit.slope, "target": -b, "tol": tol,
                     "slope_se_mc": fit.slope_se_mc, "slope_se_fit": fit.slope_se_fit,
                     "noisy": fit.noisy, "correlations": list(fit.correlations),
                     "ok": abs(fit.slope + b) <= tol})
    summ = ", ".join(f"beta={r['case'][5:]}: {r['slope']:.3f}" for r in rows)
    return CheckResult(7, "long-range dependence", all(r["ok"] for r in rows), summ, rows=rows)


def check_pde() -> CheckResult:
    p = PMF_SET
    rows = []

    def add(kind, rep, tol, f, t):
        order = pde.step_convergence_order(f, t, 0.04 * t)
        rows.append({"case": f"{kind} at {rep.point}", "lhs": rep.lhs, "rhs": rep.rhs,
                     "rel_residual": rep.rel_residual, "tol": tol, "fd_order": order,
                     "ok": rep.rel_residual < tol and order >= 1.8})

    for x, t in ((1.0, 1.0), (0.5, 3.0)):
        add("gamma", pde.gamma_pde_residual(x, t, p), 1e-6,
            lambda tt, x=x: pde.gamma_density(x, tt, p.lambda1, p.beta1), t)
    for x, t in ((1.0, 1.0), (0.3, 2.0)):
        add("tmllp", pde.tmllp_pde_residual(x, t, p), 1e-4, lambda tt, x=x: an.tmllp_pdf(x, tt, p), t)
    for k in (0, 1):
        add("tstfnbp", pde.tstfnbp_pde_residual(k, 1.0, p), 1e-3,
            lambda tt, k=k: an.tstfnbp_pmf(k, tt, p), 1.0)
    worst = max(r["rel_residual"] for r in rows)
    return CheckResult(8, "PDE residuals", all(r["ok"] for r in rows),
                       f"6 residuals, worst relative {worst:.2e}; central differences of order ~2", rows=rows)


def check_first_passage(seed: int = 42, n: int = 10_000, k: int = 3) -> CheckResult:
    p = FPT_SET
    times = [0.5, 1.0, 2.0]
    rows = []
    for t in times:
        s = an.first_passage(k, t, p, mode="survival")
        c = an.first_passage(k, t, p, mode="cdf")
        rows.append({"case": f"survival+cdf t={t}", "sum": s + c, "ok": s + c == 1.0})
    q = sample_tstfnbp_paths(p, times, RngStream(seed, 9), n)
    # counts are non-decreasing, so the first upcrossing of k happens by t iff Q(t) >= k
    for j, t in enumerate(times):
        rows.append(_freq_row(f"P[T_{k} <= {t}]", int(np.sum(q[:, j] >= k)), n,
                              an.first_passage(k, t, p, mode="cdf")))
    return CheckResult(9, "first passage", all(r["ok"] for r in rows),
                       "complementarity exact; MC upcrossing cdf within 3 s.e.", rows=rows)


def check_levy() -> CheckResult:
    p = LEVY_SET
    rows = []
    for k in (1, 2, 3):
        s = an.levy_measure_beta1(k, p)
        qv = an.levy_measure_by_quadrature(k, p)
        rows.append({"case": f"D({k})", "series": s, "quadrature": qv, "abs_err": abs(s - qv),
                     "ok": abs(s - qv) <= 1e-6})
    total = 0.0
    for k in range(1, 5000):
        d = an.levy_measure_beta1(k, p)
        total += d
        if d < 1e-17 * total:
            break
    mass = an.levy_total_mass_by_quadrature(p)
    rows.append({"case": "sum_k D(k)", "series": total, "quadrature": mass,
                 "abs_err": abs(total - mass), "ok": abs(total - mass) <= 1e-5})
    return CheckResult(10, "Levy measure", all(r["ok"] for r in rows),
                       "series = quadrature for k=1,2,3 and total mass", rows=rows)


def ml_series_oracle(alpha: float, beta: float, z: float) -> float:
    """Direct sum of z**k / Gamma(alpha k + beta) with enough digits to absorb cancellation."""
    x = abs(z)
    if x == 0:
        return float(mpmath.rgamma(beta))
    # log of the largest term, scanned in double precision
    peak, k = 0.0, 0
    while True:
        lt = k * math.log(x) - math.lgamma(alpha * k + beta)
        peak = max(peak, lt)
        if lt < peak - 80 and k > 10:
            break
        k += 1
    # alpha = p/q: 1/Gamma(alpha (j+q) + beta) = 1/Gamma(alpha j + beta) / prod_{i<p} (alpha j + beta + i)
    frac = Fraction(alpha).limit_denominator(1000)
    pn, qd = frac.numerator, frac.denominator
    with mpmath.workdps(int(peak / math.log(10)) + 40):
        a, b, zz = mpmath.mpf(pn) / qd, mpmath.mpf(beta), mpmath.mpf(z)
        tol = mpmath.mpf(10) ** (-30)
        rg = [mpmath.rgamma(a * j + b) for j in range(qd)]
        s, zj, j = mpmath.mpf(0), mpmath.mpf(1), 0
        while True:
            if j >= qd:
                base = a * (j - qd) + b
                den = mpmath.mpf(1)
                for i in range(pn):
                    den *= base + i
                rg.append(rg[j - qd] / den)
            term = zj * rg[j]
            s += term
            if j > k and abs(term) < tol * abs(s):
                break
            zj *= zz
            j += 1
        return float(s)


def check_special_functions() -> CheckResult:
    rows = []

    def add(case, got, want, tol, rel=False):
        err = abs(got - want) / (abs(want) if rel else 1.0)
        rows.append({"case": case, "value": float(got), "exact": float(want), "err": err, "ok": err <= tol})

    add("E_{1,1}(1) = e", mittag_leffler(1, 1, 1), math.e, 1e-12, True)
    add("E_{0.7,1.3}(0) = 1/Gamma(1.3)", mittag_leffler(0.7, 1.3, 0.0), 1 / math.gamma(1.3), 1e-14, True)
    add("E_{1/2,1}(-1) = e erfc(1)", mittag_leffler(0.5, 1, -1.0), math.e * math.erfc(1.0), 1e-12, True)
    add("E^1_{0.6,1}(-0.5) = E_{0.6,1}(-0.5)", prabhakar_ml(0.6, 1, 1, -0.5),
        mittag_leffler(0.6, 1, -0.5), 1e-14, True)
    with mpmath.workdps(40):
        want = mpmath.nsum(lambda k: mpmath.rf(2, k) / (mpmath.factorial(k) * mpmath.gamma(k + 1)), [0, 50])
    add("E^2_{1,1}(1) by 50-term sum", prabhakar_ml(1, 1, 2, 1.0), float(want), 1e-12, True)
    add("E^3_{0.5,1.5}(0) = 1/Gamma(1.5)", prabhakar_ml(0.5, 1.5, 3, 0.0), 1 / math.gamma(1.5), 1e-14, True)
    add("1Psi1[(1,1);(1,1)](1) = e", generalized_wright([(1, 1)], [(1, 1)], 1.0), math.e, 1e-12, True)
    try:
        generalized_wright([], [(1, 0)], 1.0)
        rows.append({"case": "b=0 lower parameter rejected", "ok": False})
    except ValueError:
        rows.append({"case": "b=0 lower parameter rejected", "ok": True})
    with mpmath.workdps(40):
        want = mpmath.nsum(lambda k: mpmath.gamma(2 + k) * mpmath.gamma(1 + k / 2) * mpmath.mpf(-0.3) ** k
                           / (mpmath.gamma(1 + k / 2) * mpmath.factorial(k)), [0, 60])
    add("2Psi1 example by 60-term sum", generalized_wright([(2, 1), (1, 0.5)], [(1, 0.5)], -0.3),
        float(want), 1e-12, True)
    add("B(1,1;0.37)", incomplete_beta(1, 1, 0.37), 0.37, 1e-15)
    add("B(2,3;1)", incomplete_beta(2, 3, 1.0), 1 / 12, 1e-15)
    with mpmath.workdps(30):
        want = mpmath.quad(lambda s: s ** -0.5 * (1 - s) ** 0.5, [0, 0.5])
    add("B(0.5,1.5;0.5) by quadrature", incomplete_beta(0.5, 1.5, 0.5), float(want), 1e-12, True)
    add("Bell(0,0)", partial_bell_ordinary([], 0, 0), 1.0, 0.0)
    add("Bell(2,1)", partial_bell_ordinary([3.0, 5.0], 2, 1), 5.0, 0.0)
    add("Bell(3,2)", partial_bell_ordinary([3.0, 5.0, 7.0], 3, 2), 30.0, 0.0)
    worst = 0.0
    for a in (0.5, 0.7, 0.9):
        for b in (1.0, 1.3):
            for z in np.linspace(-50, 0, 11):
                got = mittag_leffler(a, b, float(z))
                want = ml_series_oracle(a, b, float(z))
                err = abs(got - want) / abs(want)
                worst = max(worst, err)
                rows.append({"case": f"E_{{{a},{b}}}({z:g}) vs oracle", "value": got, "exact": want,
                             "err": err, "ok": err <= 1e-10})
    return CheckResult(11, "special functions", all(r["ok"] for r in rows),
                       f"{len(rows)} examples; negative-axis worst relative error {worst:.1e}", rows=rows)


CHECKS: dict[int, Callable[..., CheckResult]] = {
    1: check_transforms,
    2: check_subordination,
    3: check_special_collapse,
    4: check_asymptotics,
    5: check_moments,
    6: check_overdispersion,
    7: check_lrd,
    8: check_pde,
    9: check_first_passage,
    10: check_levy,
    11: check_special_functions,
}

_SEEDED = {1, 2, 3, 5, 7, 9}


def run_one(number: int, seed: int = 42) -> CheckResult:
    fn = CHECKS[number]
    t0 = time.perf_counter()
    try:
        res = fn(seed) if number in _SEEDED else fn()
    except Exception as exc:  # a crashing check is a failing check
        res = CheckResult(number, fn.__name__.removeprefix("check_"), False,
                          f"raised {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(numbers=None, seed: int = 42) -> list[CheckResult]:
    return [run_one(k, seed) for k in (numbers or sorted(CHECKS))]
