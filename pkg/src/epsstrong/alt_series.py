"""Escape and containment probabilities of a Brownian bridge in a corridor.

The probability that a Brownian bridge from ``x`` (time 0) to ``y`` (time
``l``) leaves ``[L, U]`` is an alternating series whose odd partial sums
decrease to the limit and whose even partial sums increase to it.  Everything
here works with those partial sums, so that a uniform draw can be compared
with the limit exactly after finitely many terms.

Level ``n`` of a bound object means the first ``n`` series indices ``j`` have
been used: ``upper(n)`` is the partial sum ending in ``sigma_n`` and
``lower(n)`` the one ending in ``tau_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .exceptions import DomainError
from .interval import Interval

DEFAULT_MAX_TERMS = 1000


@dataclass(frozen=True, slots=True)
class BridgeSpec:
    """Brownian bridge of duration ``l`` from ``x`` to ``y``."""

    l: float
    x: float
    y: float

    def __post_init__(self):
        if not self.l > 0:
            raise DomainError(f"bridge duration must be positive, got {self.l}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError("bridge endpoints must be finite")


@dataclass(frozen=True, slots=True)
class Corridor:
    L: float
    U: float

    def __post_init__(self):
        if not self.L < self.U:
            raise DomainError(f"corridor needs L < U, got [{self.L}, {self.U}]")


# --------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def zeta_level(L, U, l, x, y, n):
    """(lower, upper) bound on the escape probability at level ``n``.

    Bounds are clipped to [0, 1].  Infinite barriers reduce to the one-sided
    closed form.
    """
    if not (L < x < U and L < y < U):
        return 1.0, 1.0
    if math.isinf(L) or math.isinf(U):
        if math.isinf(L) and math.isinf(U):
            return 0.0, 0.0
        if math.isinf(L):
            p = math.exp(-2.0 * (U - x) * (U - y) / l)
        else:
            p = math.exp(-2.0 * (x - L) * (y - L) / l)
        return p, p
    d = U - L
    a = U - x
    b = U - y
    c = x - L
    e = y - L
    s = 0.0
    lo = 0.0
    hi = 1.0
    for j in range(1, n + 1):
        k = d * (j - 1)
        sig = math.exp(-2.0 * (k + a) * (k + b) / l) + math.exp(-2.0 * (k + c) * (k + e) / l)
        dj = d * j
        tau = math.exp(-2.0 * dj * (dj + x - y) / l) + math.exp(-2.0 * dj * (dj - x + y) / l)
        up = s + sig
        s = up - tau
        # rounding must never break the nesting
        hi = min(hi, up)
        lo = max(lo, s)
    if hi > 1.0:
        hi = 1.0
    if lo > hi:
        lo = hi
    return lo, hi


@njit(cache=True)
def gamma_level(L, U, l, x, y, n):
    """(lower, upper) bound on the containment probability at level ``n``."""
    lo, hi = zeta_level(L, U, l, x, y, n)
    return 1.0 - hi, 1.0 - lo


@njit(cache=True)
def zeta_partial_sums(L, U, l, x, y, n):
    """Raw partial sums S_1, S_2, ..., S_2n (unclipped)."""
    out = np.ones(2 * n)
    if not (L < x < U and L < y < U):
        return out
    d = U - L
    a = U - x
    b = U - y
    c = x - L
    e = y - L
    s = 0.0
    for j in range(1, n + 1):
        k = d * (j - 1)
        sig = math.exp(-2.0 * (k + a) * (k + b) / l) + math.exp(-2.0 * (k + c) * (k + e) / l)
        dj = d * j
        tau = math.exp(-2.0 * dj * (dj + x - y) / l) + math.exp(-2.0 * dj * (dj - x + y) / l)
        out[2 * j - 2] = s + sig
        s = s + sig - tau
        out[2 * j - 1] = s
    return out


# --------------------------------------------------------------------------
# bound objects


class AlternatingBounds:
    """Lazily extended nested bounds ``lower(n) <= limit <= upper(n)``.

    ``level_fn(n)`` returns ``(lo, hi)`` for ``n >= 1``.  Computed levels are
    memoised and forced to be nested, so the sandwich survives rounding.  One
    instance should be consumed by one caller at a time.
    """

    def __init__(self, level_fn: Callable[[int], tuple[float, float]]):
        self._fn = level_fn
        self._lo: list[float] = []
        self._hi: list[float] = []

    @classmethod
    def constant(cls, value: float) -> AlternatingBounds:
        v = float(value)
        return cls(lambda n: (v, v))

    @property
    def n(self) -> int:
        return len(self._lo)

    def _fill(self, n: int):
        if n < 1:
            raise ValueError("levels start at 1")
        while len(self._lo) < n:
            lo, hi = self._fn(len(self._lo) + 1)
            if self._lo:
                lo = max(lo, self._lo[-1])
                hi = min(hi, self._hi[-1])
            if lo > hi:
                lo = hi = 0.5 * (lo + hi)
            self._lo.append(float(lo))
            self._hi.append(float(hi))

    def lower(self, n: int) -> float:
        self._fill(n)
        return self._lo[n - 1]

    def upper(self, n: int) -> float:
        self._fill(n)
        return self._hi[n - 1]

    def interval(self, n: int) -> Interval:
        self._fill(n)
        return Interval(self._lo[n - 1], self._hi[n - 1])

    def extend(self) -> Interval:
        return self.interval(self.n + 1)

    def limit(self, tol: float = 0.0, max_terms: int = DEFAULT_MAX_TERMS) -> float:
        """Midpoint of the first bracket narrower than ``tol`` (or the last one)."""
        prev = None
        for n in range(1, max_terms + 1):
            iv = self.interval(n)
            if iv.width <= tol or (prev is not None and (iv.lo, iv.hi) == prev):
                break
            prev = (iv.lo, iv.hi)
        return iv.mid

    def width(self, n: int) -> float:
        return self.interval(n).width

    def __add__(self, other):
        return composite_bounds(lambda a, b: a + b, self, _as_bounds(other))

    __radd__ = __add__

    def __sub__(self, other):
        return composite_bounds(lambda a, b: a - b, self, _as_bounds(other))

    def __rsub__(self, other):
        return composite_bounds(lambda a, b: a - b, _as_bounds(other), self)

    def __mul__(self, other):
        return composite_bounds(lambda a, b: a * b, self, _as_bounds(other))

    __rmul__ = __mul__

    def __neg__(self):
        return composite_bounds(lambda a: -a, self)

    def __repr__(self):
        if not self._lo:
            return "AlternatingBounds(<unevaluated>)"
        return f"AlternatingBounds(n={self.n}, [{self._lo[-1]!r}, {self._hi[-1]!r}])"


def _as_bounds(v) -> AlternatingBounds:
    if isinstance(v, AlternatingBounds):
        return v
    if isinstance(v, (int, float)):
        return AlternatingBounds.constant(v)
    return NotImplemented


def composite_bounds(combine: Callable[..., Interval], *leaves: AlternatingBounds) -> AlternatingBounds:
    """Bounds on ``Z(limit_1, ..., limit_m)`` by interval arithmetic.

    ``combine`` receives one :class:`Interval` per leaf and must be built from
    ``+``, ``-`` and ``*`` (and constants).  Interval arithmetic is
    inclusion-monotone, so nested leaf brackets give nested composite
    brackets converging to the composite limit.
    """
    for leaf in leaves:
        if not isinstance(leaf, AlternatingBounds):
            raise DomainError(f"composite leaves must be AlternatingBounds, got {type(leaf).__name__}")

    def level(n):
        iv = combine(*(leaf.interval(n) for leaf in leaves))
        if isinstance(iv, (int, float)):
            return float(iv), float(iv)
        if not (math.isfinite(iv.lo) and math.isfinite(iv.hi)):
            raise DomainError("composite bound is not finite")
        return iv.lo, iv.hi

    return AlternatingBounds(level)


def sigma_tau_terms(spec: BridgeSpec, corr: Corridor, j: int) -> tuple[float, float]:
    """The j-th positive and negative terms of the escape-probability series."""
    L, U = corr.L, corr.U
    if j < 1:
        raise DomainError("series index starts at 1")
    if not (L < spec.x < U and L < spec.y < U):
        raise DomainError("endpoints must lie strictly inside the corridor")
    x, y, l = spec.x, spec.y, spec.l
    d = U - L

    def sig_bar(xx, yy, xi):
        return math.exp(-2.0 / l * (d * j + xi - xx) * (d * j + xi - yy))

    def tau_bar(xx, yy):
        return math.exp(-2.0 * j / l * (d * d * j + d * (xx - yy)))

    sigma = sig_bar(x, y, L) + sig_bar(-x, -y, -U)
    tau = tau_bar(x, y) + tau_bar(-x, -y)
    return sigma, tau


def zeta_bounds(spec: BridgeSpec, corr: Corridor) -> AlternatingBounds:
    """Bounds on the probability that the bridge leaves ``[L, U]``.

    Endpoints on or outside a barrier give the constant 1.
    """
    L, U, l, x, y = corr.L, corr.U, spec.l, spec.x, spec.y
    return AlternatingBounds(lambda n: zeta_level(L, U, l, x, y, n))


def gamma_bounds(spec: BridgeSpec, corr: Corridor) -> AlternatingBounds:
    """Bounds on the probability that the bridge stays inside ``(L, U)``."""
    L, U, l, x, y = corr.L, corr.U, spec.l, spec.x, spec.y
    return AlternatingBounds(lambda n: gamma_level(L, U, l, x, y, n))


def decide_below(R: float, bounds: AlternatingBounds, max_terms: int = DEFAULT_MAX_TERMS):
    """Exactly decide ``R < limit``.

    Returns True/False, or None when ``max_terms`` levels (or floating-point
    stagnation of the bracket) leave ``R`` inside the bracket.
    """
    prev = None
    stale = 0
    for n in range(1, max_terms + 1):
        lo = bounds.lower(n)
        hi = bounds.upper(n)
        if R < lo:
            return True
        if R > hi:
            return False
        # terms only shrink, so a bracket frozen for several levels is final
        stale = stale + 1 if prev == (lo, hi) else 0
        if stale >= 3:
            return None
        prev = (lo, hi)
    return None
