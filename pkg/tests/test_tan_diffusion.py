import math

import numpy as np
import pytest
from scipy import integrate, stats

from epsstrong.exceptions import DomainError
from epsstrong.tan_diffusion import HALF_PI, sample_transition, sample_transitions, transition_density_bounds
from oracles import binned_chi2, tan_density


@pytest.mark.parametrize("x,y,t", [(0.0, 0.0, 1.0), (0.5, -0.3, 0.2), (1.4, 1.2, 0.5)])
def test_density_bounds(x, y, t):
    b = transition_density_bounds(x, y, t)
    ref = tan_density(x, y, t) * math.exp(-t / 2)
    iv = b.interval(3)
    assert iv.lo <= ref + 1e-13 and ref <= iv.hi + 1e-13
    assert b.limit() == pytest.approx(ref, rel=1e-10)


def test_oracle_normalised():
    tot, _ = integrate.quad(lambda y: tan_density(0.3, y, 0.7), -HALF_PI, HALF_PI)
    assert tot == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("x0,t", [(0.0, 0.5), (1.2, 0.25), (1.5, 0.1), (-1.45, 1.0)])
def test_transition_law(x0, t):
    ys = sample_transitions(x0, t, 5000, np.random.default_rng(0))
    assert np.all(np.abs(ys) < HALF_PI)
    chi2, dof = binned_chi2(ys, lambda y: tan_density(x0, y, t), -HALF_PI, HALF_PI, bins=30)
    assert stats.chi2.sf(chi2, dof) > 1e-3


def test_symmetry():
    a = sample_transitions(1.4, 0.3, 200, np.random.default_rng(1))
    b = sample_transitions(-1.4, 0.3, 200, np.random.default_rng(1))
    np.testing.assert_allclose(a, -b)


def test_domain():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        sample_transition(HALF_PI, 0.1, rng)
    with pytest.raises(DomainError):
        sample_transition(0.0, 0.0, rng)
    with pytest.raises(DomainError):
        transition_density_bounds(0.0, 2.0, 1.0)
    y, props = sample_transition(0.0, 0.5, rng, return_proposals=True)
    assert props >= 1


def test_density_vanishes_at_walls():
    for y in (HALF_PI - 1e-3, HALF_PI - 1e-6, -HALF_PI + 1e-6):
        assert transition_density_bounds(0.2, y, 0.5).interval(2).hi < 2e-3


def test_near_wall_acceptance():
    rng = np.random.default_rng(2)
    props = [sample_transition(1.5, 0.1, rng, return_proposals=True)[1] for _ in range(2000)]
    assert 2000 / sum(props) > 0.05
