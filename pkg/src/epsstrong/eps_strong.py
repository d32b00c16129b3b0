"""Piecewise-constant processes that sandwich a Brownian path, tightened on demand.

Each generation bisects every layer of the current partition and refines
the children until their extremum intervals are no wider than the square
root of their duration.  The upper process on a layer is the top of its
maximum interval and the lower process the bottom of its minimum interval.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .alt_series import DEFAULT_MAX_TERMS, BridgeSpec
from .bridge_sampling import DEFAULT_MAX_ITER
from .exceptions import DomainError
from .layer_events import sample_initial_layers
from .layers import IntersectionLayer, LayerPartition


@dataclass(frozen=True)
class DominatingPaths:
    generation: int
    u_lo: np.ndarray
    u_hi: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_partition(cls, part: LayerPartition) -> DominatingPaths:
        r = part.rows
        return cls(part.generation, r[:, 0].copy(), r[:, 1].copy(), r[:, 4].copy(), r[:, 7].copy())

    def __len__(self):
        return self.u_lo.shape[0]

    def evaluate(self, u):
        """(lower, upper) at times ``u``; piece boundaries belong to the right piece."""
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self.u_lo, u, side="right") - 1, 0, len(self) - 1)
        return self.lower[k], self.upper[k]

    def to_csv_rows(self):
        for a, b, lo, hi in zip(self.u_lo.tolist(), self.u_hi.tolist(), self.lower.tolist(), self.upper.tolist()):
            yield f"{self.generation},{a!r},{b!r},{lo!r},{hi!r}"


CSV_HEADER = "generation,u_lo,u_hi,lower,upper"


def dominating_csv(trace) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for dom in trace:
        for line in dom.to_csv_rows():
            buf.write(line + "\n")
    return buf.getvalue()


def gap_metrics(dom: DominatingPaths) -> dict:
    gap = dom.upper - dom.lower
    return {"sup_gap": float(gap.max()), "l1_gap": float(np.sum(gap * (dom.u_hi - dom.u_lo)))}


def initial_partition(x0: float, x1: float, rng, T: float = 1.0,
                      max_terms: int = DEFAULT_MAX_TERMS) -> LayerPartition:
    """Generation-0 partition: one layer with exactly sampled extremum intervals."""
    rng_ = sample_initial_layers(BridgeSpec(T, x0, x1), rng, max_terms=max_terms)
    return LayerPartition.from_layers([IntersectionLayer(0.0, T, x0, x1, *rng_)])


def advance(part: LayerPartition, rng, max_terms: int = DEFAULT_MAX_TERMS,
            max_iter: int = DEFAULT_MAX_ITER) -> LayerPartition:
    return part.advance(rng, max_terms, max_iter)


def run(x0: float, x1: float, n: int, rng, T: float = 1.0, trace: bool = True,
        max_terms: int = DEFAULT_MAX_TERMS, max_iter: int = DEFAULT_MAX_ITER,
        start: LayerPartition | None = None):
    """Run ``n`` generations for a Brownian path with ``W_0 = x0`` and ``W_T = x1``.

    Returns the final partition and, if ``trace`` is set, the dominating
    paths of generations ``0..n`` (an empty list otherwise).  ``start`` may
    supply a generation-0 partition in place of the sampled one.
    """
    if n < 0:
        raise DomainError("number of generations must be nonnegative")
    part = start if start is not None else initial_partition(x0, x1, rng, T, max_terms)
    hist = [DominatingPaths.from_partition(part)] if trace else []
    for _ in range(n):
        part = part.advance(rng, max_terms, max_iter)
        if trace:
            hist.append(DominatingPaths.from_partition(part))
    return part, hist
