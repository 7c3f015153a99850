"""Seedable samplers for the subordinators and counting processes.

Constructions used:

* one-sided stable ``S_alpha(1)`` (Laplace transform ``exp(-u**alpha)``):
  Kanter's representation from one uniform angle and one exponential;
* tempered stable ``S_{alpha,mu}(dt)``: exponential tilting by rejection,
  with ``dt`` split into pieces of size at most ``1 / mu**alpha`` so the
  acceptance rate stays above ``exp(-1)``;
* gamma subordinator: numpy's gamma generator;
* TMLLP ``M(t) = S_{alpha,mu}(G(t))``: gamma operational-time increments
  fed to tempered stable increments;
* fractional Poisson process: renewal process with Mittag-Leffler waiting
  times (two-uniform inverse formula);
* TSTFNBP ``Q(t) = N_beta(M(t))``: one renewal sequence per path read off at
  the ordered thresholds ``M(t_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import ConstraintError, DomainError, RejectionBudgetError

__all__ = [
    "ProcessParams",
    "RngStream",
    "SamplePath",
    "sample_stable_unit",
    "sample_tempered_stable_increment",
    "sample_gamma_increment",
    "sample_tmllp_path",
    "sample_tmllp_paths",
    "sample_ml_waiting_time",
    "sample_fpp_counts",
    "sample_tstfnbp_path",
    "sample_tstfnbp_paths",
    "sample_inverse_stable",
]

REJECTION_BUDGET = 10**6
_MAX_PIECES_PER_BLOCK = 1 << 21


@dataclass(frozen=True)
class ProcessParams:
    """Parameters of the TSTFNBP family.

    ``alpha`` tempered-stable index, ``beta`` FPP fractional index, ``beta1``
    and ``lambda1`` gamma-clock shape rate and rate, ``mu`` tempering, ``lam``
    Poisson intensity.
    """

    alpha: float = 0.5
    beta: float = 0.5
    beta1: float = 1.0
    lambda1: float = 2.0
    mu: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "beta1", "lambda1", "mu", "lam"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite real, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if self.beta1 <= 0 or self.lambda1 <= 0 or self.lam <= 0:
            raise DomainError("beta1, lambda1 and lam must be positive")
        if self.mu < 0:
            raise DomainError(f"mu must be non-negative, got {self.mu}")

    @property
    def pdf_ok(self) -> bool:
        """True when ``lambda1 > mu**alpha`` (series density and Levy density exist)."""
        return self.lambda1 > self.mu ** self.alpha

    def require_pdf(self) -> None:
        if not self.pdf_ok:
            raise ConstraintError(
                f"lambda1={self.lambda1} must exceed mu**alpha={self.mu ** self.alpha:.6g}"
            )

    @property
    def drift(self) -> float:
        """Long-run growth rate ``alpha beta1 mu**(alpha-1) / lambda1`` of M(t)."""
        if self.mu == 0:
            return math.inf
        return self.alpha * self.beta1 * self.mu ** (self.alpha - 1.0) / self.lambda1

    def with_(self, **changes) -> "ProcessParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "beta", "beta1", "lambda1", "mu", "lam")}


@dataclass
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with the same identifiers yield the same variates; distinct
    ``stream_id`` values are independent via numpy ``SeedSequence`` spawn keys.
    """

    seed: int
    stream_id: int = 0
    path: tuple = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise DomainError("stream_id must be non-negative")
        ss = np.random.SeedSequence(int(self.seed),
                                    spawn_key=(int(self.stream_id),) + tuple(self.path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """An independent sub-stream, deterministic in ``index``."""
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))


RngLike = Union[RngStream, np.random.Generator, int, None]


def _gen(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class SamplePath:
    """A realisation on a time grid; ``times[0] == 0`` with ``values[0] == 0``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.times) <= 0) or self.times[0] < 0:
            raise DomainError("times must be non-negative and strictly increasing")

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0 or not np.all(np.isfinite(g)):
        raise DomainError("grid must be a non-empty list of finite times")
    if g[0] <= 0:
        raise DomainError("grid times must be > 0")
    bad = np.nonzero(np.diff(g) <= 0)[0]
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"grid not strictly increasing at entries {i} ({g[i]}) and {i + 1} ({g[i + 1]})")
    return g


# ---------------------------------------------------------------------------
# stable family
# ---------------------------------------------------------------------------

def _stable_unit(alpha: float, gen: np.random.Generator, n: int) -> np.ndarray:
    u = math.pi * (1.0 - gen.random(n))          # (0, pi]
    e = gen.standard_exponential(n)
    with np.errstate(divide="ignore"):
        log_s = (np.log(np.sin(alpha * u)) - np.log(np.sin(u)) / alpha
                 + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(e)))
    return np.exp(log_s)


def sample_stable_unit(alpha: float, rng: RngLike = None, size=None):
    """Draw ``S_alpha(1)`` with ``E[exp(-u S)] = exp(-u**alpha)``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    gen = _gen(rng)
    n = 1 if size is None else int(np.prod(size))
    out = _stable_unit(float(alpha), gen, n)
    return float(out[0]) if size is None else out.reshape(size)


def _tilted_pieces(alpha, mu, piece, gen, budget):
    """Exact S_{alpha,mu}(piece) for an array of piece lengths by rejection."""
    out = np.empty_like(piece)
    todo = np.arange(piece.size)
    scale = piece ** (1.0 / alpha)
    rounds = 0
    while todo.size:
        rounds += 1
        if rounds > budget:
            raise RejectionBudgetError(
                f"tempered stable rejection exceeded {budget} proposals")
        x = scale[todo] * _stable_unit(alpha, gen, todo.size)
        accept = gen.random(todo.size) < np.exp(-mu * x)
        out[todo[accept]] = x[accept]
        todo = todo[~accept]
    return out


def _tempered_stable_sum(alpha: float, mu: float, dts: np.ndarray, gen, budget=REJECTION_BUDGET):
    """S_{alpha,mu}(dt_i) for each entry of ``dts`` (independent draws)."""
    dts = np.asarray(dts, dtype=float)
    flat = dts.ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    if mu == 0.0:
        idx = np.nonzero(pos)[0]
        out[idx] = flat[idx] ** (1.0 / alpha) * _stable_unit(alpha, gen, idx.size)
        return out.reshape(dts.shape)
    rate = mu ** alpha
    m = np.where(pos, np.maximum(1, np.ceil(flat * rate)), 0).astype(np.int64)
    idx_all = np.nonzero(pos)[0]
    # process in blocks bounded by total piece count
    csum = np.cumsum(m[idx_all])
    start = 0
    while start < idx_all.size:
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _MAX_PIECES_PER_BLOCK, side="right"))
        stop = max(stop, start + 1)
        idx = idx_all[start:stop]
        counts = m[idx]
        piece = np.repeat(flat[idx] / counts, counts)
        draws = _tilted_pieces(alpha, mu, piece, gen, budget)
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[idx] = np.add.reduceat(draws, offsets)
        start = stop
    return out.reshape(dts.shape)


def sample_tempered_stable_increment(alpha: float, mu: float, dt: float, rng: RngLike = None,
                                     size=None, budget: int = REJECTION_BUDGET):
    """Draw ``S_{alpha,mu}(dt)``, Laplace transform ``exp(-dt((mu+u)**alpha - mu**alpha))``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if mu < 0:
        raise DomainError("mu must be non-negative")
    if not dt > 0:
        raise DomainError("dt must be positive")
    gen = _gen(rng)
    n = 1 if size is None else int(np.prod(size))
    out = _tempered_stable_sum(float(alpha), float(mu), np.full(n, float(dt)), gen, budget)
    return float(out[0]) if size is None else out.reshape(size)


# ---------------------------------------------------------------------------
# gamma clock and TMLLP
# ---------------------------------------------------------------------------

def sample_gamma_increment(lambda1: float, beta1: float, dt: float, rng: RngLike = None, size=None):
    """Gamma(shape=beta1*dt, rate=lambda1) draw."""
    if not (lambda1 > 0 and beta1 > 0 and dt > 0):
        raise DomainError("lambda1, beta1 and dt must be positive")
    return _gen(rng).gamma(beta1 * dt, 1.0 / lambda1, size=size)


def sample_tmllp_paths(params: ProcessParams, grid: Sequence[float], rng: RngLike = None,
                       n_paths: int = 1) -> np.ndarray:
    """``M(t_i)`` for ``n_paths`` independent paths, shape ``(n_paths, len(grid))``."""
    g = _check_grid(grid)
    gen = _gen(rng)
    dt = np.diff(np.concatenate(([0.0], g)))
    dG = gen.gamma(params.beta1 * dt[None, :], 1.0 / params.lambda1, size=(n_paths, g.size))
    dM = _tempered_stable_sum(params.alpha, params.mu, dG, gen)
    return np.cumsum(dM, axis=1)


def sample_tmllp_path(params: ProcessParams, grid: Sequence[float], rng: RngLike = None) -> SamplePath:
    m = sample_tmllp_paths(params, grid, rng, 1)[0]
    return SamplePath(np.concatenate(([0.0], _check_grid(grid))), np.concatenate(([0.0], m)))


# ---------------------------------------------------------------------------
# fractional Poisson process
# ---------------------------------------------------------------------------

def _ml_waiting(beta, lam, gen, n):
    if beta == 1.0:
        return gen.standard_exponential(n) / lam
    u = 1.0 - gen.random(n)
    v = 1.0 - gen.random(n)
    ratio = np.sin(beta * math.pi * (1.0 - v)) / np.sin(beta * math.pi * v)
    return -np.log(u) * lam ** (-1.0 / beta) * ratio ** (1.0 / beta)


def sample_ml_waiting_time(beta: float, lam: float, rng: RngLike = None, size=None):
    """Waiting time with survival ``E_{beta,1}(-lam w**beta)``; exponential at beta=1."""
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    if not lam > 0:
        raise DomainError("lam must be positive")
    n = 1 if size is None else int(np.prod(size))
    out = _ml_waiting(float(beta), float(lam), _gen(rng), n)
    return float(out[0]) if size is None else out.reshape(size)


def _renewal_counts(beta, lam, thresholds: np.ndarray, gen) -> np.ndarray:
    """Counts of renewal epochs <= each threshold, one renewal sequence per row.

    ``thresholds`` has shape (n_paths, m) and is non-decreasing along rows.
    """
    n, m = thresholds.shape
    counts = np.zeros((n, m), dtype=np.int64)
    epoch = np.zeros(n)
    active = np.nonzero(thresholds[:, -1] > 0)[0]
    while active.size:
        epoch[active] += _ml_waiting(beta, lam, gen, active.size)
        hit = epoch[active, None] <= thresholds[active]
        counts[active] += hit
        active = active[hit[:, -1]]
    return counts


def sample_fpp_counts(beta: float, lam: float, eval_times, rng: RngLike = None, n_paths=None):
    """FPP counts ``N_beta(t_i, lam)`` along one renewal sequence per path.

    ``eval_times`` is either a shared 1-d increasing list or a per-path
    array of shape ``(n_paths, m)``.  Returns an int array; 1-d when a single
    path is requested via a 1-d ``eval_times`` and ``n_paths=None``.
    """
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    t = np.asarray(eval_times, dtype=float)
    squeeze = t.ndim == 1 and n_paths is None
    if t.ndim == 1:
        t = np.broadcast_to(t, (1 if n_paths is None else int(n_paths), t.size))
    if np.any(t < 0) or np.any(np.diff(t, axis=1) < 0):
        raise DomainError("eval_times must be non-negative and increasing")
    counts = _renewal_counts(float(beta), float(lam), t, _gen(rng))
    return counts[0] if squeeze else counts


# ---------------------------------------------------------------------------
# TSTFNBP
# ---------------------------------------------------------------------------

def sample_tstfnbp_paths(params: ProcessParams, grid: Sequence[float], rng: RngLike = None,
                         n_paths: int = 1, return_subordinator: bool = False):
    """``Q(t_i) = N_beta(M(t_i))`` for ``n_paths`` paths.

    The TMLLP values are already ordered along each path, so they serve
    directly as renewal thresholds.
    """
    gen = _gen(rng)
    m = sample_tmllp_paths(params, grid, gen, n_paths)
    q = _renewal_counts(params.beta, params.lam, m, gen)
    return (q, m) if return_subordinator else q


def sample_tstfnbp_path(params: ProcessParams, grid: Sequence[float], rng: RngLike = None) -> SamplePath:
    q = sample_tstfnbp_paths(params, grid, rng, 1)[0]
    return SamplePath(np.concatenate(([0.0], _check_grid(grid))), np.concatenate(([0], q)))


def sample_inverse_stable(beta: float, t: float, rng: RngLike = None, size=None):
    """Inverse stable subordinator ``E_beta(t) = (t / S_beta(1))**beta`` in law."""
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if not t > 0:
        raise DomainError("t must be positive")
    s = sample_stable_unit(beta, rng, size)
    return (t / s) ** beta
