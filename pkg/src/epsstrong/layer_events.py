"""Probabilities and exact samplers for events conditioned on a layer.

``beta``: both extrema of a bridge fall in given ranges.
``rho``: the same, for a bridge pinned additionally at an interior point.
``E``: which of the nine admissible range patterns the two half-bridges
take after a bisection.

All comparisons against uniforms are decided through nested bounds, so
samplers are exact; nothing is truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import count

import numpy as np
from numba import njit

from .alt_series import (
    DEFAULT_MAX_TERMS,
    AlternatingBounds,
    BridgeSpec,
    Corridor,
    composite_bounds,
    decide_below,
    gamma_bounds,
    gamma_level,
)
from .exceptions import DomainError, UndecidedError

# Rows of admissible patterns after bisection, as
# (left min, left max, right min, right max); 1 keeps the parent's range,
# 0 means the extremum moved inwards.
E_PATTERNS = np.array(
    [
        (1, 1, 1, 1),
        (1, 1, 0, 1),
        (1, 1, 1, 0),
        (1, 1, 0, 0),
        (0, 1, 1, 1),
        (0, 1, 1, 0),
        (1, 0, 1, 1),
        (1, 0, 0, 1),
        (0, 0, 1, 1),
    ],
    dtype=np.int64,
)


@dataclass(frozen=True, slots=True)
class ExtremaRanges:
    """Ranges ``[Ldown, Lup]`` for the minimum and ``[Udown, Uup]`` for the maximum."""

    Ldown: float
    Lup: float
    Udown: float
    Uup: float

    def __post_init__(self):
        if not (self.Ldown <= self.Lup <= self.Udown <= self.Uup):
            raise DomainError(f"invalid extrema ranges {tuple(self)}")

    def __iter__(self):
        yield from (self.Ldown, self.Lup, self.Udown, self.Uup)


@dataclass(frozen=True, slots=True)
class EventE:
    index: int
    left_min: bool
    left_max: bool
    right_min: bool
    right_max: bool

    @classmethod
    def from_index(cls, i: int) -> EventE:
        if not 1 <= i <= 9:
            raise ValueError(f"event index must be in 1..9, got {i}")
        lm, lM, rm, rM = (bool(v) for v in E_PATTERNS[i - 1])
        return cls(i, lm, lM, rm, rM)


# --------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _clip01(v):
    return min(max(v, 0.0), 1.0)


@njit(cache=True)
def beta_level(Ld, Lu, Ud, Uu, l, x, y, n):
    """Bounds on P[Ld < min < Lu, Ud < max < Uu] at level ``n``."""
    a_lo, a_hi = gamma_level(Ld, Uu, l, x, y, n)
    b_lo, b_hi = gamma_level(Lu, Uu, l, x, y, n)
    c_lo, c_hi = gamma_level(Ld, Ud, l, x, y, n)
    d_lo, d_hi = gamma_level(Lu, Ud, l, x, y, n)
    lo = a_lo - b_hi - c_hi + d_lo
    hi = a_hi - b_lo - c_lo + d_hi
    return _clip01(lo), _clip01(hi)


@njit(cache=True)
def rho_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n):
    """Bounds on the joint-extrema probability of a bridge pinned at ``w``."""
    lo = 0.0
    hi = 0.0
    for k in range(4):
        L = Ld if k == 0 or k == 2 else Lu
        U = Uu if k < 2 else Ud
        sgn = 1.0 if k == 0 or k == 3 else -1.0
        g1lo, g1hi = gamma_level(L, U, q, x, w, n)
        g2lo, g2hi = gamma_level(L, U, r, w, y, n)
        if sgn > 0:
            lo += g1lo * g2lo
            hi += g1hi * g2hi
        else:
            lo -= g1hi * g2hi
            hi -= g1lo * g2lo
    return _clip01(lo), _clip01(hi)


@njit(cache=True)
def _side_betas(Ld, Lu, Ud, Uu, l, x, y, n, out):
    # out[k] = (lo, hi) of beta for (min flag, max flag) = (k // 2, k % 2)
    # with 0-ranges [Lu, min(x,y)] and [max(x,y), Ud]; gammas with a barrier
    # at an endpoint vanish, leaving four distinct gammas.
    g0lo, g0hi = gamma_level(Ld, Uu, l, x, y, n)
    g1lo, g1hi = gamma_level(Lu, Uu, l, x, y, n)
    g2lo, g2hi = gamma_level(Ld, Ud, l, x, y, n)
    g3lo, g3hi = gamma_level(Lu, Ud, l, x, y, n)
    out[0, 0] = _clip01(g3lo)
    out[0, 1] = _clip01(g3hi)
    out[1, 0] = _clip01(g1lo - g3hi)
    out[1, 1] = _clip01(g1hi - g3lo)
    out[2, 0] = _clip01(g2lo - g3hi)
    out[2, 1] = _clip01(g2hi - g3lo)
    out[3, 0] = _clip01(g0lo - g1hi - g2hi + g3lo)
    out[3, 1] = _clip01(g0hi - g1lo - g2lo + g3hi)


@njit(cache=True)
def e_weights_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n, out):
    """Fill ``out`` (9 x 2) with bounds on the nine unnormalised E weights.

    Ranges must already be tightened by ``w``.
    """
    left = np.empty((4, 2))
    right = np.empty((4, 2))
    _side_betas(Ld, Lu, Ud, Uu, q, x, w, n, left)
    _side_betas(Ld, Lu, Ud, Uu, r, w, y, n, right)
    for i in range(9):
        kl = 2 * E_PATTERNS[i, 0] + E_PATTERNS[i, 1]
        kr = 2 * E_PATTERNS[i, 2] + E_PATTERNS[i, 3]
        out[i, 0] = left[kl, 0] * right[kr, 0]
        out[i, 1] = left[kl, 1] * right[kr, 1]


@njit(cache=True)
def sample_e_index(Ld, Lu, Ud, Uu, q, r, x, w, y, R, max_terms):
    """Inverse-CDF draw of E for uniform ``R``; 0 means undecided.

    ``R < P[E <= i]`` is decided as ``(1-R) A_i - R B_i > 0`` with ``A_i``
    the weights up to ``i`` and ``B_i`` the rest, which avoids dividing by
    the normaliser.
    """
    wts = np.empty((9, 2))
    i = 0
    prev_lo = np.nan
    prev_hi = np.nan
    stale = 0
    for n in range(1, max_terms + 1):
        e_weights_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n, wts)
        while i < 9:
            a_lo = 0.0
            a_hi = 0.0
            b_lo = 0.0
            b_hi = 0.0
            for k in range(9):
                if k <= i:
                    a_lo += wts[k, 0]
                    a_hi += wts[k, 1]
                else:
                    b_lo += wts[k, 0]
                    b_hi += wts[k, 1]
            d_lo = (1.0 - R) * a_lo - R * b_hi
            d_hi = (1.0 - R) * a_hi - R * b_lo
            if d_lo > 0.0:
                return i + 1
            if d_hi < 0.0 or (i < 8 and a_hi == 0.0):
                i += 1
                continue
            break
        if i >= 9:
            return 0
        if d_lo == prev_lo and d_hi == prev_hi:
            stale += 1
            if stale >= 3:
                return 0
        else:
            stale = 0
        prev_lo = d_lo
        prev_hi = d_hi
    return 0


@njit(cache=True)
def split_decide(Ld, Lu, Ud, Uu, l, x, y, which_max, split, R, max_terms):
    """Decide on which side of ``split`` an extremum lies.

    For the maximum returns 1 if it lies in ``[split, Uu]``; for the minimum
    returns 1 if it lies in ``[Ld, split]``; 0 otherwise and -1 if undecided.
    """
    prev_lo = np.nan
    prev_hi = np.nan
    stale = 0
    for n in range(1, max_terms + 1):
        if which_max:
            nlo, nhi = beta_level(Ld, Lu, split, Uu, l, x, y, n)
            olo, ohi = beta_level(Ld, Lu, Ud, split, l, x, y, n)
        else:
            nlo, nhi = beta_level(Ld, split, Ud, Uu, l, x, y, n)
            olo, ohi = beta_level(split, Lu, Ud, Uu, l, x, y, n)
        d_lo = (1.0 - R) * nlo - R * ohi
        d_hi = (1.0 - R) * nhi - R * olo
        if d_lo > 0.0:
            return 1
        if d_hi < 0.0:
            return 0
        if d_lo == prev_lo and d_hi == prev_hi:
            stale += 1
            if stale >= 3:
                return -1
        else:
            stale = 0
        prev_lo = d_lo
        prev_hi = d_hi
    return -1


@njit(cache=True)
def decide_gamma_below(R, L, U, l, x, y, max_terms):
    """1 if ``R`` is below the containment probability, 0 if not, -1 undecided."""
    prev_lo = np.nan
    prev_hi = np.nan
    stale = 0
    for n in range(1, max_terms + 1):
        lo, hi = gamma_level(L, U, l, x, y, n)
        if R < lo:
            return 1
        if R > hi:
            return 0
        if lo == prev_lo and hi == prev_hi:
            stale += 1
            if stale >= 3:
                return -1
        else:
            stale = 0
        prev_lo = lo
        prev_hi = hi
    return -1


# --------------------------------------------------------------------------
# bound objects


def _check_ranges(ranges):
    if not isinstance(ranges, ExtremaRanges):
        ranges = ExtremaRanges(*ranges)
    return ranges


def beta_bounds(ranges: ExtremaRanges, spec: BridgeSpec) -> AlternatingBounds:
    """Bounds on ``P[Ldown < min < Lup, Udown < max < Uup]`` for the bridge.

    Inclusion-exclusion over four containment probabilities.
    """
    Ld, Lu, Ud, Uu = _check_ranges(ranges)
    if not (Ld < Lu and Ud < Uu):
        return AlternatingBounds.constant(0.0)
    gs = []
    for L, U in ((Ld, Uu), (Lu, Uu), (Ld, Ud), (Lu, Ud)):
        if L < U:
            gs.append(gamma_bounds(spec, Corridor(L, U)))
        else:
            gs.append(AlternatingBounds.constant(0.0))
    return composite_bounds(lambda a, b, c, d: (a - b - c + d).clip(0.0, 1.0), *gs)


def rho_bounds(ranges: ExtremaRanges, q: float, r: float, x: float, w: float, y: float) -> AlternatingBounds:
    """Bounds on the joint-extrema probability of a bridge that passes ``w`` at time ``q``."""
    Ld, Lu, Ud, Uu = _check_ranges(ranges)
    if not (q > 0 and r > 0):
        raise DomainError("sub-bridge durations must be positive")
    return AlternatingBounds(lambda n: rho_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n))


def e_weight_bounds(ranges: ExtremaRanges, q, r, x, w, y) -> list[AlternatingBounds]:
    """Bounds on each of the nine unnormalised E weights (ranges tightened by ``w``)."""
    Ld, Lu, Ud, Uu = _check_ranges(ranges)
    Lu, Ud = min(Lu, w), max(Ud, w)
    cache = {}

    def level(n):
        if n not in cache:
            out = np.empty((9, 2))
            e_weights_level(Ld, Lu, Ud, Uu, q, r, x, w, y, n, out)
            cache[n] = out
        return cache[n]

    return [AlternatingBounds(lambda n, i=i: tuple(level(n)[i])) for i in range(9)]


def sample_E(ranges: ExtremaRanges, q, r, x, w, y, rng, max_terms: int = DEFAULT_MAX_TERMS) -> EventE:
    """Draw the range pattern of the two half-bridges given the midpoint ``w``.

    The ranges are those of the parent layer; they are tightened by ``w``
    here before the nine weights are formed.
    """
    Ld, Lu, Ud, Uu = _check_ranges(ranges)
    Lu, Ud = min(Lu, w), max(Ud, w)
    i = sample_e_index(Ld, Lu, Ud, Uu, q, r, x, w, y, rng.random(), max_terms)
    if i == 0:
        raise UndecidedError("E draw undecided", w=w)
    return EventE.from_index(int(i))


def refine_bernoulli(layer, which: str, rng, max_terms: int = DEFAULT_MAX_TERMS) -> bool:
    """True iff the chosen extremum lies in the outer half of its range.

    Outer means ``[mid, Uup]`` for the maximum and ``[Ldown, mid]`` for the
    minimum.  A range of (numerically) zero width returns False.
    """
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    lo, hi = (layer.min_lo, layer.min_hi) if which == "min" else (layer.max_lo, layer.max_hi)
    mid = 0.5 * (lo + hi)
    if not lo < mid < hi:
        return False
    return split_bernoulli(layer, which, mid, rng, max_terms)


def split_bernoulli(layer, which: str, split: float, rng, max_terms: int = DEFAULT_MAX_TERMS) -> bool:
    """Like :func:`refine_bernoulli` but splitting at an arbitrary interior point."""
    res = split_decide(
        layer.min_lo, layer.min_hi, layer.max_lo, layer.max_hi,
        layer.t - layer.s, layer.xs, layer.xt,
        which == "max", split, rng.random(), max_terms,
    )
    if res < 0:
        raise UndecidedError("refinement undecided", which=which, split=split)
    return bool(res)


# --------------------------------------------------------------------------
# initial layer


def default_grid(l: float):
    """Offsets ``a_i``: ``i * sqrt(l)`` up to ``i = 4``, then doubling."""
    root = math.sqrt(l)

    def a(i: int) -> float:
        if i <= 4:
            return i * root
        return 4 * root * 2.0 ** (i - 4)

    return a


def _cells():
    # shells of constant max(i, j)
    for k in count(1):
        for j in range(1, k + 1):
            yield k, j
        for i in range(1, k):
            yield i, k


def initial_cell_bounds(spec: BridgeSpec, i: int, j: int, a=None, b=None) -> AlternatingBounds:
    a = a or default_grid(spec.l)
    b = b or default_grid(spec.l)
    lo_end, hi_end = min(spec.x, spec.y), max(spec.x, spec.y)
    ranges = ExtremaRanges(lo_end - a(i), lo_end - a(i - 1), hi_end + b(j - 1), hi_end + b(j))
    return beta_bounds(ranges, spec)


def sample_initial_cell(spec: BridgeSpec, rng, a=None, b=None, max_terms: int = DEFAULT_MAX_TERMS,
                        max_cells: int = 5000) -> tuple[int, int]:
    """Exact draw of the cell index ``(i, j)`` of the bridge's (min, max)."""
    R = rng.random()
    cum = AlternatingBounds.constant(0.0)
    for m, (i, j) in enumerate(_cells()):
        if m >= max_cells:
            break
        cum = cum + initial_cell_bounds(spec, i, j, a, b)
        res = decide_below(R, cum, max_terms)
        if res is None:
            raise UndecidedError("initial layer draw undecided", cell=(i, j))
        if res:
            return i, j
    raise UndecidedError("initial layer draw ran out of cells")


def sample_initial_layers(spec: BridgeSpec, rng, a=None, b=None,
                          max_terms: int = DEFAULT_MAX_TERMS) -> ExtremaRanges:
    """Exact draw of initial extrema ranges for a bridge with no other information.

    ``a`` and ``b`` map ``i >= 0`` to increasing offsets with ``a(0) = 0``;
    the default is :func:`default_grid`.
    """
    a = a or default_grid(spec.l)
    b = b or default_grid(spec.l)
    i, j = sample_initial_cell(spec, rng, a, b, max_terms)
    lo_end, hi_end = min(spec.x, spec.y), max(spec.x, spec.y)
    return ExtremaRanges(lo_end - a(i), lo_end - a(i - 1), hi_end + b(j - 1), hi_end + b(j))
