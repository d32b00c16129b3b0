"""Intersection layers and the two ways of revealing more about them.

A layer is a Brownian bridge on ``[s, t]`` from ``xs`` to ``xt`` together
with an interval known to contain its minimum and one known to contain its
maximum.  ``refine`` halves one of these intervals, ``bisect`` reveals the
midpoint and splits the layer into two.

Partitions keep their layers as rows of a float array
``[s, t, xs, xt, min_lo, min_hi, max_lo, max_hi]`` in time order, so whole
generations are advanced inside compiled code.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .alt_series import DEFAULT_MAX_TERMS
from .bridge_sampling import DEFAULT_MAX_ITER, EMPTY, OK, STALLED, UNDECIDED, sample_midpoint_kernel
from .exceptions import DomainError, SamplerStallError, UndecidedError
from .interval import Interval
from .layer_events import E_PATTERNS, sample_e_index, split_decide

FIELDS = ("s", "t", "xs", "xt", "min_lo", "min_hi", "max_lo", "max_hi")


@dataclass(frozen=True, slots=True)
class IntersectionLayer:
    s: float
    t: float
    xs: float
    xt: float
    min_lo: float
    min_hi: float
    max_lo: float
    max_hi: float

    def __post_init__(self):
        if not self.s < self.t:
            raise DomainError(f"layer needs s < t, got {self.s}, {self.t}")
        if not (self.min_lo <= self.min_hi <= min(self.xs, self.xt)):
            raise DomainError(f"minimum range [{self.min_lo}, {self.min_hi}] inconsistent with endpoints")
        if not (max(self.xs, self.xt) <= self.max_lo <= self.max_hi):
            raise DomainError(f"maximum range [{self.max_lo}, {self.max_hi}] inconsistent with endpoints")

    @property
    def duration(self) -> float:
        return self.t - self.s

    @property
    def min_range(self) -> Interval:
        return Interval(self.min_lo, self.min_hi)

    @property
    def max_range(self) -> Interval:
        return Interval(self.max_lo, self.max_hi)

    @property
    def ranges(self) -> tuple[float, float, float, float]:
        return self.min_lo, self.min_hi, self.max_lo, self.max_hi

    def as_row(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FIELDS], dtype=float)

    @classmethod
    def from_row(cls, row) -> IntersectionLayer:
        return cls(*(float(v) for v in row))

    @classmethod
    def from_ranges(cls, s, t, xs, xt, min_range, max_range) -> IntersectionLayer:
        return cls(s, t, xs, xt, *min_range, *max_range)


# --------------------------------------------------------------------------
# kernels on rows


@njit(cache=True)
def refine_row(row, which_max, rng, max_terms):
    """Halve one extremum interval of ``row`` in place; returns -1 if undecided."""
    L_d, L_u, U_d, U_u = row[4], row[5], row[6], row[7]
    if which_max:
        mid = 0.5 * (U_d + U_u)
        if not U_d < mid < U_u:
            return 0
    else:
        mid = 0.5 * (L_d + L_u)
        if not L_d < mid < L_u:
            return 0
    res = split_decide(L_d, L_u, U_d, U_u, row[1] - row[0], row[2], row[3], which_max, mid, rng.random(), max_terms)
    if res < 0:
        return -1
    if which_max:
        if res == 1:
            row[6] = mid
        else:
            row[7] = mid
    else:
        if res == 1:
            row[5] = mid
        else:
            row[4] = mid
    return 0


@njit(cache=True)
def refine_row_to_width(row, target, rng, max_terms):
    """Alternately refine max then min until both widths are at most ``target``."""
    while row[7] - row[6] > target or row[5] - row[4] > target:
        if row[7] - row[6] > target:
            if refine_row(row, True, rng, max_terms) < 0:
                return UNDECIDED
        if row[5] - row[4] > target:
            if refine_row(row, False, rng, max_terms) < 0:
                return UNDECIDED
    return OK


@njit(cache=True)
def bisect_row(row, rng, max_terms, max_iter, left, right):
    """Fill ``left`` and ``right`` with the two halves of ``row``; returns a status."""
    s, t, xs, xt = row[0], row[1], row[2], row[3]
    Ld, Lu, Ud, Uu = row[4], row[5], row[6], row[7]
    q = 0.5 * (t - s)
    w, status, _ = sample_midpoint_kernel(Ld, Lu, Ud, Uu, q, q, xs, xt, rng, max_terms, max_iter)
    if status != OK:
        return status
    Lu = min(Lu, w)
    Ud = max(Ud, w)
    e = sample_e_index(Ld, Lu, Ud, Uu, q, q, xs, w, xt, rng.random(), max_terms)
    if e == 0:
        return UNDECIDED
    lm = E_PATTERNS[e - 1, 0]
    lM = E_PATTERNS[e - 1, 1]
    rm = E_PATTERNS[e - 1, 2]
    rM = E_PATTERNS[e - 1, 3]
    tm = s + q
    left[0] = s
    left[1] = tm
    left[2] = xs
    left[3] = w
    right[0] = tm
    right[1] = t
    right[2] = w
    right[3] = xt
    for side in range(2):
        out = left if side == 0 else right
        a = xs if side == 0 else w
        b = w if side == 0 else xt
        keep_min = lm if side == 0 else rm
        keep_max = lM if side == 0 else rM
        if keep_min == 1:
            out[4] = Ld
            out[5] = Lu
        else:
            out[4] = Lu
            out[5] = min(a, b)
        if keep_max == 1:
            out[6] = Ud
            out[7] = Uu
        else:
            out[6] = max(a, b)
            out[7] = Ud
    return OK


@njit(cache=True)
def advance_rows(rows, rng, max_terms, max_iter):
    """One generation: bisect every row, then refine each child to width sqrt(duration).

    Returns ``(children, status, failing row index)``.
    """
    n = rows.shape[0]
    out = np.empty((2 * n, 8))
    for i in range(n):
        left = out[2 * i]
        right = out[2 * i + 1]
        status = bisect_row(rows[i], rng, max_terms, max_iter, left, right)
        if status != OK:
            return out, status, i
        target = math.sqrt(left[1] - left[0])
        if refine_row_to_width(left, target, rng, max_terms) != OK:
            return out, UNDECIDED, i
        if refine_row_to_width(right, target, rng, max_terms) != OK:
            return out, UNDECIDED, i
    return out, OK, -1


def raise_for_status(status: int, **context):
    if status == OK:
        return
    if status == UNDECIDED:
        raise UndecidedError("layer operation undecided", **context)
    if status == STALLED:
        raise SamplerStallError(f"midpoint sampler stalled ({context})")
    if status == EMPTY:
        raise DomainError(f"layer has zero probability ({context})")
    raise RuntimeError(f"unknown status {status}")


# --------------------------------------------------------------------------
# single-layer API


def refine(layer: IntersectionLayer, which: str, rng, max_terms: int = DEFAULT_MAX_TERMS) -> IntersectionLayer:
    """Halve the minimum or maximum interval, keeping the half that holds the extremum."""
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    lo, hi = (layer.min_lo, layer.min_hi) if which == "min" else (layer.max_lo, layer.max_hi)
    if not hi > lo:
        raise DomainError(f"{which} interval has zero width")
    row = layer.as_row()
    if refine_row(row, which == "max", rng, max_terms) < 0:
        raise UndecidedError("refinement undecided", which=which)
    return IntersectionLayer.from_row(row)


def refine_at(layer: IntersectionLayer, which: str, split: float, rng,
              max_terms: int = DEFAULT_MAX_TERMS) -> IntersectionLayer:
    """Split an extremum interval at an interior point and keep the side holding the extremum."""
    lo, hi = (layer.min_lo, layer.min_hi) if which == "min" else (layer.max_lo, layer.max_hi)
    if not lo < split < hi:
        raise DomainError("split point must be interior to the interval")
    res = split_decide(*layer.ranges, layer.duration, layer.xs, layer.xt, which == "max", float(split),
                       rng.random(), max_terms)
    if res < 0:
        raise UndecidedError("refinement undecided", which=which, split=split)
    Ld, Lu, Ud, Uu = layer.ranges
    if which == "max":
        Ud, Uu = (split, Uu) if res == 1 else (Ud, split)
    else:
        Ld, Lu = (Ld, split) if res == 1 else (split, Lu)
    return IntersectionLayer(layer.s, layer.t, layer.xs, layer.xt, Ld, Lu, Ud, Uu)


def refine_to_width(layer: IntersectionLayer, target: float, rng,
                    max_terms: int = DEFAULT_MAX_TERMS) -> IntersectionLayer:
    row = layer.as_row()
    raise_for_status(refine_row_to_width(row, float(target), rng, max_terms))
    return IntersectionLayer.from_row(row)


def bisect(layer: IntersectionLayer, rng, max_terms: int = DEFAULT_MAX_TERMS,
           max_iter: int = DEFAULT_MAX_ITER) -> tuple[IntersectionLayer, IntersectionLayer]:
    """Reveal the path at the midpoint time and split into two layers.

    No width refinement is applied to the children.
    """
    left = np.empty(8)
    right = np.empty(8)
    raise_for_status(bisect_row(layer.as_row(), rng, max_terms, max_iter, left, right), s=layer.s, t=layer.t)
    return IntersectionLayer.from_row(left), IntersectionLayer.from_row(right)


# --------------------------------------------------------------------------
# partitions


class LayerPartition:
    """Time-ordered, contiguous layers; generation ``n`` after ``n`` full sweeps."""

    def __init__(self, rows, generation: int = 0):
        rows = np.array(rows, dtype=float, copy=True).reshape(-1, 8)
        rows.setflags(write=False)
        self.rows = rows
        self.generation = generation

    @classmethod
    def from_layers(cls, layers, generation: int = 0) -> LayerPartition:
        return cls(np.array([lay.as_row() for lay in layers]), generation)

    def __len__(self):
        return self.rows.shape[0]

    def __getitem__(self, i) -> IntersectionLayer:
        return IntersectionLayer.from_row(self.rows[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def s(self):
        return self.rows[:, 0]

    @property
    def t(self):
        return self.rows[:, 1]

    def check(self):
        """Raise if the partition is not contiguous or a row breaks layer invariants."""
        r = self.rows
        if len(r) > 1:
            if not (np.array_equal(r[1:, 0], r[:-1, 1]) and np.array_equal(r[1:, 2], r[:-1, 3])):
                raise DomainError("partition is not contiguous")
        for i in range(len(self)):
            self[i]  # construction validates
        return self

    def advance(self, rng, max_terms: int = DEFAULT_MAX_TERMS, max_iter: int = DEFAULT_MAX_ITER) -> LayerPartition:
        children, status, idx = advance_rows(np.ascontiguousarray(self.rows), rng, max_terms, max_iter)
        raise_for_status(status, generation=self.generation + 1, layer=int(idx))
        return LayerPartition(children, self.generation + 1)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(("s", "t", "xs", "xt", "minLo", "minHi", "maxLo", "maxHi")) + "\n")
        for row in self.rows:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, generation: int = 0) -> LayerPartition:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines and lines[0].startswith("s,"):
            lines = lines[1:]
        rows = [[float(v) for v in ln.split(",")] for ln in lines]
        if any(len(r) != 8 for r in rows):
            raise ValueError("each layer line needs eight fields")
        return cls(np.array(rows).reshape(-1, 8), generation)
