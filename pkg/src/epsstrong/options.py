"""Double-barrier option payoffs as monotone bounders, plus an Euler baseline.

Prices follow ``log S_t = log S0 + (r - sigma^2/2) t + sigma W_t``.  With
``X = log(S) / sigma`` each payoff becomes a functional of a Brownian motion
with drift inside the corridor ``(L, U) = (log L_S, log U_S) / sigma``.
Given ``X_T`` the path is a plain Brownian bridge, so layers apply directly.

Three payoffs are covered:

* ``fa``: ``e^{-rT} (sup S - K)^+`` on paths that stay within the barriers;
* ``fb``: ``e^{-rT} (mean of S - K)^+`` with the same barrier condition;
* ``fc``: ``e^{-rT} (sup S - K)^+`` with the barriers applied to the
  discounted price ``S_t e^{-rt}``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .alt_series import DEFAULT_MAX_TERMS, BridgeSpec
from .bridge_sampling import DEFAULT_MAX_ITER
from .eps_strong import DominatingPaths
from .exceptions import DomainError, UndecidedError
from .layer_events import decide_gamma_below, sample_initial_layers
from .layers import (
    IntersectionLayer,
    LayerPartition,
    advance_rows,
    bisect,
    raise_for_status,
    refine_at,
    refine_row,
)

CASES = ("a", "b", "c")


@dataclass(frozen=True)
class MarketParams:
    r: float = 0.05
    sigma: float = 0.2
    S0: float = 1.0
    K: float = 1.0
    T: float = 1.0
    U_S: float = 1.25
    L_S: float = 0.75

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("volatility must be positive")
        if not self.T > 0:
            raise DomainError("maturity must be positive")
        if not 0 < self.L_S < self.S0 < self.U_S:
            raise DomainError("need 0 < L_S < S0 < U_S")


@dataclass(frozen=True)
class BmContext:
    X0: float
    L: float
    U: float
    T: float
    drift: float
    sigma: float
    r: float
    K: float
    case: str

    def __post_init__(self):
        if not self.L < self.X0 < self.U:
            raise DomainError("start must lie strictly inside the corridor")

    def payoff_of_level(self, x):
        """``e^{-rT} (e^{sigma x} - K)^+``, nondecreasing in ``x``."""
        return math.exp(-self.r * self.T) * max(math.exp(self.sigma * x) - self.K, 0.0)


def map_gbm(params: MarketParams, case: str) -> BmContext:
    if case not in CASES:
        raise DomainError(f"case must be one of {CASES}")
    p = params
    drift = -p.sigma / 2 if case == "c" else p.r / p.sigma - p.sigma / 2
    return BmContext(
        X0=math.log(p.S0) / p.sigma,
        L=math.log(p.L_S) / p.sigma,
        U=math.log(p.U_S) / p.sigma,
        T=p.T,
        drift=drift,
        sigma=p.sigma,
        r=p.r,
        K=p.K,
        case=case,
    )


def draw_terminal_and_gate(ctx: BmContext, rng, max_terms: int = DEFAULT_MAX_TERMS):
    """Draw ``X_T`` and whether the path stays in the corridor.

    Returns ``None`` if it does not; otherwise the layer with minimum in
    ``[L, X0 ^ X_T]`` and maximum in ``[X0 v X_T, U]``.
    """
    xT = ctx.X0 + ctx.drift * ctx.T + math.sqrt(ctx.T) * rng.normal()
    R = rng.random()
    if not ctx.L < xT < ctx.U:
        return None
    res = decide_gamma_below(R, ctx.L, ctx.U, ctx.T, ctx.X0, xT, max_terms)
    if res < 0:
        raise UndecidedError("corridor indicator undecided", xT=xT)
    if res == 0:
        return None
    return IntersectionLayer(0.0, ctx.T, ctx.X0, xT, ctx.L, min(ctx.X0, xT), max(ctx.X0, xT), ctx.U)


# --------------------------------------------------------------------------
# bounders


class _Bounder:
    def __init__(self, layer: IntersectionLayer, ctx: BmContext, rng, max_terms=DEFAULT_MAX_TERMS,
                 max_iter=DEFAULT_MAX_ITER):
        self.ctx = ctx
        self.rng = rng
        self.max_terms = max_terms
        self.max_iter = max_iter
        self.generation = 0
        self.rows = layer.as_row().reshape(1, 8)
        self._update()

    def partition(self) -> LayerPartition:
        return LayerPartition(self.rows, self.generation)

    def _advance(self):
        children, status, idx = advance_rows(self.rows, self.rng, self.max_terms, self.max_iter)
        raise_for_status(status, generation=self.generation + 1, layer=int(idx))
        self.rows = children


class FaBounder(_Bounder):
    """Only the maximum matters: each step halves its interval."""

    def _update(self):
        self.lower = self.ctx.payoff_of_level(self.rows[0, 6])
        self.upper = self.ctx.payoff_of_level(self.rows[0, 7])

    def step(self):
        row = self.rows[0]
        if row[7] > row[6] and refine_row(row, True, self.rng, self.max_terms) < 0:
            raise UndecidedError("refinement undecided", generation=self.generation + 1)
        self.generation += 1
        self._update()


class FbBounder(_Bounder):
    """Time average of ``e^{sigma X}`` integrated exactly over the dominating paths."""

    def _update(self):
        r = self.rows
        dt = r[:, 1] - r[:, 0]
        disc = math.exp(-self.ctx.r * self.ctx.T)
        lo = np.sum(np.exp(self.ctx.sigma * r[:, 4]) * dt) / self.ctx.T
        hi = np.sum(np.exp(self.ctx.sigma * r[:, 7]) * dt) / self.ctx.T
        self.lower = disc * max(lo - self.ctx.K, 0.0)
        self.upper = disc * max(hi - self.ctx.K, 0.0)

    def dominating(self) -> DominatingPaths:
        return DominatingPaths.from_partition(self.partition())

    def step(self):
        self._advance()
        self.generation += 1
        self._update()


class FcBounder(_Bounder):
    """Supremum of ``X_t + (r / sigma) t``, bisecting only layers that can still hold it."""

    def _sup_bounds(self):
        c = self.ctx.r / self.ctx.sigma
        r = self.rows
        lo_shift = np.minimum(c * r[:, 0], c * r[:, 1])
        hi_shift = np.maximum(c * r[:, 0], c * r[:, 1])
        return float(np.max(r[:, 6] + lo_shift)), r[:, 7] + hi_shift

    def _update(self):
        sup_lo, tops = self._sup_bounds()
        keep = tops >= sup_lo
        self.rows = np.ascontiguousarray(self.rows[keep])
        self.sup_lower = sup_lo
        self.sup_upper = float(np.max(tops[keep]))
        self.lower = self.ctx.payoff_of_level(self.sup_lower)
        self.upper = self.ctx.payoff_of_level(self.sup_upper)

    @property
    def n_retained(self) -> int:
        return self.rows.shape[0]

    def step(self):
        self._advance()
        self.generation += 1
        self._update()


BOUNDERS = {"a": FaBounder, "b": FbBounder, "c": FcBounder}


def bounder_fa(layer, ctx, rng, **kw) -> FaBounder:
    return FaBounder(layer, ctx, rng, **kw)


def bounder_fb(layer, ctx, rng, **kw) -> FbBounder:
    return FbBounder(layer, ctx, rng, **kw)


def bounder_fc(layer, ctx, rng, **kw) -> FcBounder:
    return FcBounder(layer, ctx, rng, **kw)


# --------------------------------------------------------------------------
# Euler baseline


def euler_payoffs(params: MarketParams, case: str, delta: float, n: int, rng) -> np.ndarray:
    """Discounted payoffs of ``n`` paths observed on a grid of mesh ``delta``.

    Price steps are exact lognormal transitions; extrema and the time
    average are read off the grid (left-point rule for the average).
    """
    if case not in CASES:
        raise DomainError(f"case must be one of {CASES}")
    steps = int(round(params.T / delta))
    if steps < 2 or not math.isclose(steps * delta, params.T, rel_tol=1e-9):
        raise DomainError("delta must divide the maturity into at least two steps")
    p = params
    h = p.T / steps
    incr = (p.r - 0.5 * p.sigma**2) * h + p.sigma * math.sqrt(h) * rng.standard_normal((n, steps))
    logS = np.empty((n, steps + 1))
    logS[:, 0] = math.log(p.S0)
    np.cumsum(incr, axis=1, out=logS[:, 1:])
    logS[:, 1:] += math.log(p.S0)
    S = np.exp(logS)
    disc = math.exp(-p.r * p.T)
    if case == "c":
        Sd = S * np.exp(-p.r * h * np.arange(steps + 1))
        inside = (Sd.min(axis=1) > p.L_S) & (Sd.max(axis=1) < p.U_S)
    else:
        inside = (S.min(axis=1) > p.L_S) & (S.max(axis=1) < p.U_S)
    if case == "b":
        level = S[:, :-1].mean(axis=1)
    else:
        level = S.max(axis=1)
    return disc * np.maximum(level - p.K, 0.0) * inside


def euler_price(params: MarketParams, case: str, delta: float, n_samples: int, rng,
                block: int = 10_000) -> dict:
    vals = np.concatenate([
        euler_payoffs(params, case, delta, min(block, n_samples - i), rng)
        for i in range(0, n_samples, block)
    ])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return {"mean": float(vals.mean()), "stderr": se}


# --------------------------------------------------------------------------
# hitting a time-dependent boundary


class Boundary:
    """A boundary ``H(t)`` in the Brownian coordinate with exact extrema over intervals."""

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def inf(self, s: float, t: float) -> float:
        raise NotImplementedError

    def sup(self, s: float, t: float) -> float:
        raise NotImplementedError


class ConstantBoundary(Boundary):
    def __init__(self, h: float):
        self.h = float(h)

    def __call__(self, t):
        return self.h

    def inf(self, s, t):
        return self.h

    def sup(self, s, t):
        return self.h


class LinearBoundary(Boundary):
    """``H(t) = h0 + slope * t``; extrema sit at interval endpoints."""

    def __init__(self, h0: float, slope: float):
        self.h0 = float(h0)
        self.slope = float(slope)

    def __call__(self, t):
        return self.h0 + self.slope * t

    def inf(self, s, t):
        return min(self(s), self(t))

    def sup(self, s, t):
        return max(self(s), self(t))


def hitting_indicator(ctx: BmContext, boundary: Boundary, rng, n_max: int = 10,
                      layer: IntersectionLayer | None = None, max_terms: int = DEFAULT_MAX_TERMS) -> str:
    """Whether the path reaches ``boundary`` before ``T``: 'hit', 'no-hit' or 'capped'.

    Without ``layer`` the terminal value and an initial layer are drawn
    afresh; a layer from :func:`draw_terminal_and_gate` may be passed
    instead, in which case the answer is conditional on the corridor.
    Ambiguous layers are examined left to right; those still ambiguous
    after ``n_max`` bisections are counted as capped.
    """
    if not ctx.X0 < boundary(0.0):
        raise DomainError("the path must start below the boundary")
    if layer is None:
        xT = ctx.X0 + ctx.drift * ctx.T + math.sqrt(ctx.T) * rng.normal()
        rg = sample_initial_layers(BridgeSpec(ctx.T, ctx.X0, xT), rng, max_terms=max_terms)
        layer = IntersectionLayer(0.0, ctx.T, ctx.X0, xT, *rg)
    work = deque([(layer, 0)])
    capped = False
    while work:
        lay, depth = work.popleft()
        s, t = lay.s, lay.t
        if lay.xs >= boundary(s) or lay.xt >= boundary(t):
            return "hit"
        h_lo, h_hi = boundary.inf(s, t), boundary.sup(s, t)
        if lay.max_hi <= h_lo:
            continue
        if lay.max_lo >= h_hi:
            return "hit"
        if lay.max_lo < h_hi < lay.max_hi:
            lay = refine_at(lay, "max", h_hi, rng, max_terms)
            if lay.max_lo >= h_hi:
                return "hit"
        if lay.max_lo < h_lo < lay.max_hi:
            lay = refine_at(lay, "max", h_lo, rng, max_terms)
            if lay.max_hi <= h_lo:
                continue
        if depth >= n_max:
            capped = True
            continue
        left, right = bisect(lay, rng, max_terms)
        work.appendleft((right, depth + 1))
        work.appendleft((left, depth + 1))
    return "capped" if capped else "no-hit"
