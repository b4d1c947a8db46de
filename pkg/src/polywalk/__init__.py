"""Constrained random portfolios: geometric walks, exact results, backtests."""

from .backtest import (
    BacktestConfig,
    BacktestResult,
    MarketData,
    concatenate_by_score,
    quintile_baseline,
    report,
    run_backtest,
    synth_market,
)
from .densities import Dirichlet, ShadowDirichlet, Transformed, Uniform
from .diagnostics import ess, gate, psrf
from .exact import (
    dirichlet_moments,
    monotone_M,
    rp_linear_cdf,
    sample_bootstrap_rp,
    sample_dirichlet,
    sample_shadow_dirichlet,
    varsi_cdf,
)
from .geometry import (
    AffineEmbedding,
    ConvexBody,
    Ellipsoid,
    HPolytope,
    boundary_oracle,
    build_embedding,
    chebyshev_ball,
    embed_body,
    interior_point,
    membership,
    normal_at,
    reflect,
    simplex_body,
)
from .portfolio import ConstraintSpec, MarketSnapshot, build_body, portfolio_stats, zscore_winsorize
from .rounding import RoundingTransform, isotropy_report, round_isotropic
from .walks import SampleSet, WalkConfig, WalkState, sample

__version__ = "0.1.0"
