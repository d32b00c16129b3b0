"""Exact two-sided bounds on Brownian paths and the unbiased estimators they enable."""

from .alt_series import (
    AlternatingBounds,
    BridgeSpec,
    Corridor,
    composite_bounds,
    decide_below,
    gamma_bounds,
    sigma_tau_terms,
    zeta_bounds,
)
from .bridge_sampling import EnvelopeF1, build_envelope, sample_midpoint, sample_midpoints
from .eps_strong import DominatingPaths, gap_metrics, run
from .estimators import EstimateRecord, estimate_exponential, estimate_uniform_improved
from .exceptions import DomainError, SamplerStallError, UndecidedError
from .interval import Interval
from .layer_events import (
    EventE,
    ExtremaRanges,
    beta_bounds,
    refine_bernoulli,
    rho_bounds,
    sample_E,
    sample_initial_layers,
)
from .layers import IntersectionLayer, LayerPartition, bisect, refine, refine_at
from .options import MarketParams, draw_terminal_and_gate, euler_price, hitting_indicator, map_gbm
from .streams import stream
from .tan_diffusion import sample_transition, transition_density_bounds

__version__ = "0.1.0"
