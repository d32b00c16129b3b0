import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from epsstrong.bridge_sampling import (
    build_envelope,
    log_ndtr,
    log_ndtr_diff,
    prior_moments,
    sample_midpoint,
)
from epsstrong.exceptions import DomainError
from epsstrong.layer_events import ExtremaRanges
from oracles import ks_against_table, midpoint_cdf_table, midpoint_density

CONTEXTS = [
    (ExtremaRanges(-1.2, -0.4, 0.6, 1.5), 0.5, 0.5, 0.0, 0.2),
    (ExtremaRanges(-0.55, -0.3, 0.4, 0.65), 0.25, 0.75, -0.1, 0.2),
    (ExtremaRanges(-3.0, -0.01, 0.01, 3.0), 0.5, 0.5, 0.0, 0.0),
]


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 8))
def test_log_ndtr(z):
    assert log_ndtr(z) == pytest.approx(special.log_ndtr(z), rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 8), st.floats(1e-6, 5))
def test_log_ndtr_diff(a, width):
    b = a + width
    mpmath.mp.dps = 50
    ref = mpmath.log(mpmath.ncdf(b) - mpmath.ncdf(a))
    assert log_ndtr_diff(a, b) == pytest.approx(float(ref), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("ctx", CONTEXTS)
def test_envelope_dominates_and_integrates(ctx):
    ranges, q, r, x, y = ctx
    env = build_envelope(ranges, q, r, x, y)
    m, v = prior_moments(q, r, x, y)
    f = midpoint_density(ranges, q, r, x, y)
    norm = 1.0 / math.sqrt(2 * math.pi * v)
    for w in np.linspace(ranges.Ldown, ranges.Uup, 801)[1:-1]:
        assert f(w) * norm <= env.pdf(w) * (1 + 1e-9) + 1e-300
    mass, _ = integrate.quad(env.pdf, ranges.Ldown, ranges.Uup, points=list(env.edges), limit=500)
    assert env.mass == pytest.approx(mass, rel=1e-7)


@pytest.mark.parametrize("ctx", CONTEXTS)
def test_envelope_inversion(ctx):
    env = build_envelope(*ctx)
    for R in (1e-9, 0.1, 0.5, 0.9, 1 - 1e-9):
        w = env.invert(R)
        assert env.cdf(w) == pytest.approx(R * env.mass, rel=1e-10, abs=1e-12 * env.mass)


@pytest.mark.parametrize("ctx", CONTEXTS)
def test_midpoint_law(ctx):
    ranges, q, r, x, y = ctx
    rng = np.random.default_rng(11)
    ws = np.array([sample_midpoint(ranges, q, r, x, y, rng) for _ in range(4000)])
    assert np.all((ws > ranges.Ldown) & (ws < ranges.Uup))
    grid, cdf = midpoint_cdf_table(ranges, q, r, x, y)
    # 1% critical value of the one-sample KS statistic
    assert ks_against_table(ws, grid, cdf) < 1.63 / math.sqrt(ws.size)


def test_midpoint_domain():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        sample_midpoint(ExtremaRanges(-1, -0.5, 0.5, 1), 0.5, 0.5, 0.0, 1.2, rng)
    with pytest.raises(DomainError):
        sample_midpoint(ExtremaRanges(-1, -0.5, 0.5, 1), 0.0, 0.5, 0.0, 0.1, rng)


def test_return_proposals():
    w, props = sample_midpoint(*CONTEXTS[0], np.random.default_rng(2), return_proposals=True)
    assert props >= 1 and CONTEXTS[0][0].Ldown < w < CONTEXTS[0][0].Uup
