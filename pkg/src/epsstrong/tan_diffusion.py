"""Exact transitions of ``dX = -tan(X) dt + dW`` on ``(-pi/2, pi/2)``.

The transition density is proportional to
``cos(y) * gamma(-pi/2, pi/2; t, x, y) * p0(y; x, t)`` with ``p0`` the
free Brownian kernel.  Away from the walls a free Gaussian proposal is
accepted with probability ``cos(y) * gamma``.  Close to a wall that
probability is small everywhere, so the proposal instead follows the
bound ``gamma <= 2 (pi/2 - x) z / t`` together with ``cos(y) <= z``,
where ``z = pi/2 - y`` is the distance to the wall.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.special import ndtr

from .alt_series import DEFAULT_MAX_TERMS, AlternatingBounds, gamma_level
from .bridge_sampling import DEFAULT_MAX_ITER
from .exceptions import DomainError, SamplerStallError, UndecidedError
from .layer_events import decide_gamma_below

HALF_PI = 0.5 * math.pi
BOUNDARY_MARGIN = 0.3


def transition_density_bounds(x: float, y: float, t: float) -> AlternatingBounds:
    """Bounds on ``cos(y) / cos(x) * gamma * p0``, the density up to a factor ``e^{t/2}``."""
    if not (abs(x) < HALF_PI and abs(y) < HALF_PI):
        raise DomainError("states must lie in (-pi/2, pi/2)")
    if not t > 0:
        raise DomainError("duration must be positive")
    c = math.cos(y) / math.cos(x) * math.exp(-((y - x) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)

    def level(n):
        lo, hi = gamma_level(-HALF_PI, HALF_PI, t, x, y, n)
        return c * lo, c * hi

    return AlternatingBounds(level)


@njit(cache=True)
def _interior_kernel(x, t, rng, max_terms, max_iter):
    sd = math.sqrt(t)
    for it in range(1, max_iter + 1):
        y = x + sd * rng.standard_normal()
        R = rng.random()
        if not -HALF_PI < y < HALF_PI:
            continue
        res = decide_gamma_below(R / math.cos(y), -HALF_PI, HALF_PI, t, x, y, max_terms)
        if res == 1:
            return y, 0, it
        if res < 0:
            return y, 1, it
    return math.nan, 2, max_iter


def _wall_cdf(v, mu, s):
    # mass of z^2 phi((z - mu) / s) below z = mu + s v, up to the factor s
    return (mu * mu + s * s) * ndtr(v) - s * (2 * mu + s * v) * math.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)


def _near_wall(x, t, rng, max_terms, max_iter):
    mu = HALF_PI - x
    s = math.sqrt(t)
    v0 = -mu / s
    g0 = _wall_cdf(v0, mu, s)
    total = (mu * mu + s * s) - g0
    v_hi = max(v0, 0.0) + 40.0
    for it in range(1, max_iter + 1):
        target = g0 + rng.random() * total
        v = brentq(lambda u: _wall_cdf(u, mu, s) - target, v0, v_hi, xtol=1e-14, rtol=1e-15)
        z = mu + s * v
        R = rng.random()
        if not 0.0 < z < math.pi:
            continue
        y = HALF_PI - z
        # accept iff R * (2 mu / t) z^2 < sin(z) * gamma
        thr = R * (2.0 * mu / t) * z * z / math.sin(z)
        res = decide_gamma_below(thr, -HALF_PI, HALF_PI, t, x, y, max_terms)
        if res == 1:
            return y, it
        if res < 0:
            raise UndecidedError("transition acceptance undecided", y=y)
    raise SamplerStallError(f"no acceptance in {max_iter} proposals")


def sample_transition(x0: float, t: float, rng, max_terms: int = DEFAULT_MAX_TERMS,
                      max_iter: int = DEFAULT_MAX_ITER, return_proposals: bool = False):
    """Exact draw of ``X_t`` given ``X_0 = x0``."""
    if not abs(x0) < HALF_PI:
        raise DomainError("start must lie in (-pi/2, pi/2)")
    if not t > 0:
        raise DomainError("duration must be positive")
    if abs(x0) <= HALF_PI - BOUNDARY_MARGIN:
        y, status, props = _interior_kernel(float(x0), float(t), rng, max_terms, max_iter)
        if status == 1:
            raise UndecidedError("transition acceptance undecided", y=y)
        if status == 2:
            raise SamplerStallError(f"no acceptance in {max_iter} proposals")
    else:
        sign = 1.0 if x0 > 0 else -1.0
        y, props = _near_wall(sign * x0, float(t), rng, max_terms, max_iter)
        y *= sign
    return (y, props) if return_proposals else y


def sample_transitions(x0: float, t: float, n: int, rng, **kw) -> np.ndarray:
    return np.array([sample_transition(x0, t, rng, **kw) for _ in range(n)])
