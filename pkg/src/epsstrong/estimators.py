"""Unbiased estimators of E[F(X)] built from monotone bounds on F(X).

A bounder exposes ``lower`` and ``upper`` at its current generation and a
``step()`` that tightens them.  Both estimators only need to know on which
side of a random threshold F(X) lies, which a finite number of steps
decides almost surely.  A cap ``n_max`` on the number of generations trades
a small, explicitly bounded bias for bounded work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from .exceptions import DomainError

NEST_TOL = 1e-12


class FunctionalBounder(Protocol):
    generation: int
    lower: float
    upper: float

    def step(self) -> None: ...


@dataclass(frozen=True)
class EstimateRecord:
    value: float
    generations_used: int
    hit_nmax: bool
    bias_bound: float = 0.0


class ConstantBounder:
    """F is known exactly from the start."""

    def __init__(self, c: float):
        self.lower = self.upper = float(c)
        self.generation = 0

    def step(self):
        self.generation += 1


def _step_checked(b: FunctionalBounder):
    lo, hi = b.lower, b.upper
    b.step()
    tol = NEST_TOL * max(1.0, abs(lo), abs(hi))
    assert b.lower >= lo - tol and b.upper <= hi + tol and b.lower <= b.upper + tol, (
        f"bounds not nested at generation {b.generation}: [{lo}, {hi}] -> [{b.lower}, {b.upper}]"
    )


def estimate_exponential(bounder: FunctionalBounder, rng, n_max: int = 10) -> EstimateRecord:
    """``e^E 1{F > E}`` with ``E ~ Exp(1)``, for nonnegative F.

    If ``n_max`` generations leave E inside the bracket, ``e^E / 2`` is
    returned.  The true outcome is ``0`` or ``e^E``, so ``e^E / 2`` also
    bounds the error of that draw and is reported as ``bias_bound``;
    averaged over E it amounts to half the final bracket width.
    """
    E = rng.exponential()
    while True:
        if bounder.lower > E:
            return EstimateRecord(math.exp(E), bounder.generation, False)
        if bounder.upper < E:
            return EstimateRecord(0.0, bounder.generation, False)
        if bounder.generation >= n_max:
            half = 0.5 * math.exp(E)
            return EstimateRecord(half, bounder.generation, True, half)
        _step_checked(bounder)


def estimate_uniform_improved(bounder: FunctionalBounder, rng, n0: int = 2, n_max: int = 10) -> EstimateRecord:
    """Step to ``n0``, then report the upper or lower bound there by the side of a uniform.

    With ``R`` uniform on ``[lo, hi]`` (the generation-``n0`` bracket) the
    estimate is ``hi`` if ``F > R`` and ``lo`` otherwise.  Capped runs
    return the bracket midpoint with bias at most half its width.
    """
    if n0 < 0:
        raise DomainError("n0 must be nonnegative")
    if n_max < n0:
        raise DomainError("n_max must be at least n0")
    while bounder.generation < n0:
        _step_checked(bounder)
    lo, hi = bounder.lower, bounder.upper
    if not hi >= lo:
        raise DomainError(f"upper bound {hi} below lower bound {lo}")
    if hi == lo:
        return EstimateRecord(lo, bounder.generation, False)
    R = rng.uniform(lo, hi)
    while True:
        if bounder.lower > R:
            return EstimateRecord(hi, bounder.generation, False)
        if bounder.upper < R:
            return EstimateRecord(lo, bounder.generation, False)
        if bounder.generation >= n_max:
            return EstimateRecord(0.5 * (lo + hi), bounder.generation, True, 0.5 * (hi - lo))
        _step_checked(bounder)
