"""Exact draw of a bridge midpoint given the extrema ranges of the whole bridge.

The target density is proportional to ``rho(w) * pi(w)`` where ``pi`` is the
unconstrained bridge marginal at the midpoint.  The proposal replaces every
containment probability in ``rho`` by its first upper or lower partial sum
(whichever keeps the product an upper bound).  Expanded, the proposal is a
sum of signed terms ``exp(a + b w) pi(w)`` on at most three windows, and each
term integrates to a difference of normal CDFs.  Those are computed in log
space so that tail windows keep their relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .alt_series import DEFAULT_MAX_TERMS
from .exceptions import DomainError, SamplerStallError, UndecidedError
from .layer_events import ExtremaRanges, rho_level

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
DEFAULT_MAX_ITER = 1_000_000

# sampler status codes
OK = 0
UNDECIDED = 1
STALLED = 2
EMPTY = 3


@njit(cache=True)
def log_ndtr(z):
    if z > 0.0:
        return math.log1p(-0.5 * math.erfc(z / SQRT2))
    if z > -37.0:
        return math.log(0.5 * math.erfc(-z / SQRT2))
    z2 = z * z
    iz2 = 1.0 / z2
    series = 1.0 - iz2 * (1.0 - 3.0 * iz2 * (1.0 - 5.0 * iz2 * (1.0 - 7.0 * iz2)))
    return -0.5 * z2 - math.log(-z) - LOG_SQRT_2PI + math.log(series)


@njit(cache=True)
def _log1mexp(d):
    # log(1 - e^d) for d <= 0
    if d > -0.6931471805599453:
        return math.log(-math.expm1(d))
    return math.log1p(-math.exp(d))


@njit(cache=True)
def log_ndtr_diff(a, b):
    """log(Phi(b) - Phi(a)) for a <= b."""
    if not a < b:
        return -math.inf
    if a >= 0.0:
        la = log_ndtr(-a)
        lb = log_ndtr(-b)
        return la + _log1mexp(lb - la)
    if b <= 0.0:
        la = log_ndtr(a)
        lb = log_ndtr(b)
        return lb + _log1mexp(la - lb)
    return math.log(0.5 * (math.erf(b / SQRT2) - math.erf(a / SQRT2)))


# --------------------------------------------------------------------------
# envelope construction


@njit(cache=True)
def _left_terms(L, U, q, x, ca, cb, cc):
    # S1 in slots 0..1, extra S2 terms in 2..3; bridge from x to w
    d = U - L
    ca[0] = -2.0 * (U - x) * U / q
    cb[0] = 2.0 * (U - x) / q
    ca[1] = 2.0 * (x - L) * L / q
    cb[1] = -2.0 * (x - L) / q
    ca[2] = -2.0 * d * (d + x) / q
    cb[2] = 2.0 * d / q
    ca[3] = -2.0 * d * (d - x) / q
    cb[3] = -2.0 * d / q
    cc[0] = 1.0
    cc[1] = 1.0
    cc[2] = -1.0
    cc[3] = -1.0


@njit(cache=True)
def _right_terms(L, U, r, y, ca, cb, cc):
    # bridge from w to y
    d = U - L
    ca[0] = -2.0 * U * (U - y) / r
    cb[0] = 2.0 * (U - y) / r
    ca[1] = 2.0 * L * (y - L) / r
    cb[1] = -2.0 * (y - L) / r
    ca[2] = -2.0 * d * (d - y) / r
    cb[2] = -2.0 * d / r
    ca[3] = -2.0 * d * (d + y) / r
    cb[3] = 2.0 * d / r
    cc[0] = 1.0
    cc[1] = 1.0
    cc[2] = -1.0
    cc[3] = -1.0


@njit(cache=True)
def build_envelope_arrays(Ld, Lu, Ud, Uu, q, r, x, y):
    """Piecewise representation of the proposal.

    Returns ``(edges, win, coef, a, b, logk, m, alpha, cum, mu, s)``:
    window ``k`` spans ``edges[k]..edges[k+1]``; piece ``i`` lives in window
    ``win[i]`` with value ``coef[i] exp(a[i] + b[i] w) pi(w)``;
    ``logk``, ``m`` and ``alpha`` are the log scale, shifted mean and
    standardised window start of the piece integral; ``cum[k]`` is the mass
    of windows ``< k``.
    """
    l = q + r
    mu = (r * x + q * y) / l
    V = q * r / l
    s = math.sqrt(V)

    raw = np.array([Ld, Lu, Ud, Uu])
    edges = np.empty(4)
    nw = 0
    edges[0] = Ld
    for k in range(1, 4):
        if raw[k] > edges[nw]:
            nw += 1
            edges[nw] = raw[k]
    edges = edges[: nw + 1]

    cap = 3 * 70
    win = np.empty(cap, dtype=np.int64)
    coef = np.empty(cap)
    pa = np.empty(cap)
    pb = np.empty(cap)
    np_ = 0

    la = np.empty(4)
    lb = np.empty(4)
    lc = np.empty(4)
    ra = np.empty(4)
    rb = np.empty(4)
    rc = np.empty(4)

    for k in range(nw):
        lo = edges[k]
        hi = edges[k + 1]
        const = 0.0
        for p in range(4):
            L = Ld if p == 0 or p == 2 else Lu
            U = Uu if p < 2 else Ud
            sgn = 1.0 if p == 0 or p == 3 else -1.0
            if not (L < x < U and L < y < U and L <= lo and hi <= U):
                continue
            _left_terms(L, U, q, x, la, lb, lc)
            _right_terms(L, U, r, y, ra, rb, rc)
            const += sgn
            # sgn=+1 uses upper bound 1 - S2 - S2 + S1 S1 ; sgn=-1 subtracts
            # the lower bound 1 - S1 - S1 + S2 S2
            nside = 4 if sgn > 0 else 2
            for i in range(nside):
                win[np_] = k
                coef[np_] = -sgn * lc[i]
                pa[np_] = la[i]
                pb[np_] = lb[i]
                np_ += 1
                win[np_] = k
                coef[np_] = -sgn * rc[i]
                pa[np_] = ra[i]
                pb[np_] = rb[i]
                np_ += 1
            nprod = 2 if sgn > 0 else 4
            for i in range(nprod):
                for j in range(nprod):
                    win[np_] = k
                    coef[np_] = sgn * lc[i] * rc[j]
                    pa[np_] = la[i] + ra[j]
                    pb[np_] = lb[i] + rb[j]
                    np_ += 1
        if const != 0.0:
            win[np_] = k
            coef[np_] = const
            pa[np_] = 0.0
            pb[np_] = 0.0
            np_ += 1

    win = win[:np_]
    coef = coef[:np_]
    pa = pa[:np_]
    pb = pb[:np_]
    logk = np.empty(np_)
    m = np.empty(np_)
    alpha = np.empty(np_)
    cum = np.zeros(nw + 1)
    for i in range(np_):
        m[i] = mu + pb[i] * V
        logk[i] = math.log(abs(coef[i])) + pa[i] + pb[i] * mu + 0.5 * pb[i] * pb[i] * V
        alpha[i] = (edges[win[i]] - m[i]) / s
    for i in range(np_):
        k = win[i]
        beta = (edges[k + 1] - m[i]) / s
        v = math.exp(logk[i] + log_ndtr_diff(alpha[i], beta))
        cum[k + 1] += v if coef[i] > 0 else -v
    for k in range(nw):
        # a window's mass is nonnegative; rounding must not make it otherwise
        cum[k + 1] = cum[k] + max(cum[k + 1], 0.0)
    return edges, win, coef, pa, pb, logk, m, alpha, cum, mu, s


@njit(cache=True)
def _window_of(edges, w):
    nw = edges.shape[0] - 1
    for k in range(nw):
        if w <= edges[k + 1]:
            return k
    return nw - 1


@njit(cache=True)
def env_ratio(win, coef, pa, pb, k, w):
    """Proposal over prior at ``w`` in window ``k``."""
    v = 0.0
    for i in range(win.shape[0]):
        if win[i] == k:
            v += coef[i] * math.exp(pa[i] + pb[i] * w)
    return v


@njit(cache=True)
def _partial_mass(win, coef, logk, m, alpha, s, k, w):
    v = 0.0
    for i in range(win.shape[0]):
        if win[i] == k:
            t = math.exp(logk[i] + log_ndtr_diff(alpha[i], (w - m[i]) / s))
            v += t if coef[i] > 0 else -t
    return v


@njit(cache=True)
def env_cdf(edges, win, coef, logk, m, alpha, cum, s, w):
    """Unnormalised proposal mass below ``w``."""
    if w <= edges[0]:
        return 0.0
    if w >= edges[-1]:
        return cum[-1]
    k = _window_of(edges, w)
    return cum[k] + _partial_mass(win, coef, logk, m, alpha, s, k, w)


@njit(cache=True)
def env_pdf(edges, win, coef, pa, pb, mu, s, w):
    if w < edges[0] or w > edges[-1]:
        return 0.0
    k = _window_of(edges, w)
    z = (w - mu) / s
    return env_ratio(win, coef, pa, pb, k, w) * math.exp(-0.5 * z * z - LOG_SQRT_2PI) / s


@njit(cache=True)
def env_invert(edges, win, coef, pa, pb, logk, m, alpha, cum, mu, s, R, rtol):
    """Solve ``cdf(w) = R * mass`` by safeguarded Newton steps."""
    total = cum[-1]
    target = R * total
    if target <= 0.0:
        return edges[0]
    if target >= total:
        return edges[-1]
    nw = edges.shape[0] - 1
    k = 0
    while k < nw - 1 and cum[k + 1] < target:
        k += 1
    t = target - cum[k]
    lo = edges[k]
    hi = edges[k + 1]
    wmass = cum[k + 1] - cum[k]
    tol = rtol * total
    w = lo + (hi - lo) * (t / wmass if wmass > 0 else 0.5)
    for _ in range(200):
        g = _partial_mass(win, coef, logk, m, alpha, s, k, w) - t
        if abs(g) <= tol:
            return w
        if g < 0.0:
            lo = w
        else:
            hi = w
        if hi - lo <= 4e-16 * max(abs(lo), abs(hi), 1e-300):
            return 0.5 * (lo + hi)
        z = (w - mu) / s
        dens = env_ratio(win, coef, pa, pb, k, w) * math.exp(-0.5 * z * z - LOG_SQRT_2PI) / s
        wn = w - g / dens if dens > 0.0 else 0.5 * (lo + hi)
        if not (lo < wn < hi):
            wn = 0.5 * (lo + hi)
        w = wn
    return w


@njit(cache=True)
def sample_midpoint_kernel(Ld, Lu, Ud, Uu, q, r, x, y, rng, max_terms, max_iter):
    """Returns ``(w, status, proposals)``."""
    edges, win, coef, pa, pb, logk, m, alpha, cum, mu, s = build_envelope_arrays(Ld, Lu, Ud, Uu, q, r, x, y)
    if not cum[-1] > 0.0:
        return math.nan, EMPTY, 0
    for it in range(1, max_iter + 1):
        w = env_invert(edges, win, coef, pa, pb, logk, m, alpha, cum, mu, s, rng.random(), 1e-13)
        u2 = rng.random()
        if not (Ld < w < Uu):
            continue
        ratio = env_ratio(win, coef, pa, pb, _window_of(edges, w), w)
        if not ratio > 0.0:
            continue
        u = u2 * ratio
        prev_lo = math.nan
        prev_hi = math.nan
        stale = 0
        decided = 0
        for n in range(1, max_terms + 1):
            lo, hi = rho_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n)
            if u < lo:
                decided = 1
                break
            if u > hi:
                decided = -1
                break
            if lo == prev_lo and hi == prev_hi:
                stale += 1
                if stale >= 3:
                    break
            else:
                stale = 0
            prev_lo = lo
            prev_hi = hi
        if decided == 1:
            return w, OK, it
        if decided == 0:
            return w, UNDECIDED, it
    return math.nan, STALLED, max_iter


@njit(cache=True)
def sample_midpoints_kernel(Ld, Lu, Ud, Uu, q, r, x, y, n, rng, max_terms, max_iter):
    """``n`` independent draws; stops at the first failure and reports its status."""
    out = np.empty(n)
    for i in range(n):
        w, status, _ = sample_midpoint_kernel(Ld, Lu, Ud, Uu, q, r, x, y, rng, max_terms, max_iter)
        if status != OK:
            return out[:i], status
        out[i] = w
    return out, OK


# --------------------------------------------------------------------------
# Python API


@dataclass(frozen=True)
class EnvelopeF1:
    """The dominating proposal for one midpoint draw."""

    edges: np.ndarray
    win: np.ndarray
    coef: np.ndarray
    a: np.ndarray
    b: np.ndarray
    logk: np.ndarray
    m: np.ndarray
    alpha: np.ndarray
    cum: np.ndarray
    mu: float
    s: float

    @property
    def mass(self) -> float:
        return float(self.cum[-1])

    @property
    def n_pieces(self) -> int:
        return int(self.win.shape[0])

    def cdf(self, w: float) -> float:
        return env_cdf(self.edges, self.win, self.coef, self.logk, self.m, self.alpha, self.cum, self.s, float(w))

    def pdf(self, w: float) -> float:
        return env_pdf(self.edges, self.win, self.coef, self.a, self.b, self.mu, self.s, float(w))

    def ratio(self, w: float) -> float:
        """Proposal divided by the prior density at ``w``."""
        k = _window_of(self.edges, float(w))
        return env_ratio(self.win, self.coef, self.a, self.b, k, float(w))

    def invert(self, R: float, rtol: float = 1e-13) -> float:
        return env_invert(self.edges, self.win, self.coef, self.a, self.b, self.logk, self.m,
                          self.alpha, self.cum, self.mu, self.s, float(R), rtol)


def build_envelope(ranges: ExtremaRanges, q: float, r: float, x: float, y: float) -> EnvelopeF1:
    if not isinstance(ranges, ExtremaRanges):
        ranges = ExtremaRanges(*ranges)
    if not (q > 0 and r > 0):
        raise DomainError("sub-bridge durations must be positive")
    return EnvelopeF1(*build_envelope_arrays(*ranges, float(q), float(r), float(x), float(y)))


def prior_moments(q: float, r: float, x: float, y: float) -> tuple[float, float]:
    """Mean and variance of the free bridge at time ``q`` (total duration ``q + r``)."""
    return (r * x + q * y) / (q + r), q * r / (q + r)


def sample_midpoint(ranges: ExtremaRanges, q: float, r: float, x: float, y: float, rng,
                    max_terms: int = DEFAULT_MAX_TERMS, max_iter: int = DEFAULT_MAX_ITER,
                    return_proposals: bool = False):
    """Exact draw of the bridge value at time ``q`` given the extrema ranges.

    The endpoints must lie strictly inside ``(Ldown, Uup)``.
    """
    Ld, Lu, Ud, Uu = _validate(ranges, q, r, x, y)
    w, status, props = sample_midpoint_kernel(Ld, Lu, Ud, Uu, float(q), float(r), float(x), float(y),
                                              rng, max_terms, max_iter)
    _raise(status, max_iter, w=w)
    return (w, props) if return_proposals else w


def sample_midpoints(ranges: ExtremaRanges, q: float, r: float, x: float, y: float, n: int, rng,
                     max_terms: int = DEFAULT_MAX_TERMS, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """``n`` independent midpoint draws for one context, looped in compiled code."""
    Ld, Lu, Ud, Uu = _validate(ranges, q, r, x, y)
    out, status = sample_midpoints_kernel(Ld, Lu, Ud, Uu, float(q), float(r), float(x), float(y),
                                          int(n), rng, max_terms, max_iter)
    _raise(status, max_iter, drawn=len(out))
    return out


def _validate(ranges, q, r, x, y):
    if not isinstance(ranges, ExtremaRanges):
        ranges = ExtremaRanges(*ranges)
    Ld, Lu, Ud, Uu = ranges
    if not (Ld < min(x, y) and max(x, y) < Uu):
        raise DomainError("bridge endpoints are inconsistent with the extrema ranges")
    if not (q > 0 and r > 0):
        raise DomainError("sub-bridge durations must be positive")
    return Ld, Lu, Ud, Uu


def _raise(status, max_iter, **context):
    if status == UNDECIDED:
        raise UndecidedError("midpoint acceptance undecided", **context)
    if status == STALLED:
        raise SamplerStallError(f"midpoint sampler made no acceptance in {max_iter} proposals")
    if status == EMPTY:
        raise DomainError("layer has zero probability under the bridge law")
