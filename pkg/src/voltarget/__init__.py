"""Closed-form pricing, Greeks and Heston Monte Carlo for target-volatility portfolios."""

from .core_types import (
    HestonParams,
    MarketParams,
    OptionKind,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
    VolCurve,
    effective_vol,
    mlvts_weight,
    vts_weight,
)
from .errors import (
    ConfigurationError,
    DomainError,
    NumericalError,
    ValidationError,
    VolTargetError,
)
from .greeks import (
    Branch,
    GreekReport,
    PortfolioDecomposition,
    Strategy,
    decompose,
    delta,
    fd_check,
    gamma,
    greeks,
    portfolio_delta,
    vega,
    vega_argmax_v,
)
from .pricing import (
    PriceResult,
    bs_price,
    mlvts_price,
    norm_cdf,
    parity_gap,
    total_variance,
    vts_price,
)
from .simulation import (
    ConvergenceReport,
    Measure,
    Scheme,
    SimConfig,
    SimulatedPath,
    convergence_study,
    feller_check,
    mc_price,
    simulate_heston,
    simulate_portfolio,
)

__version__ = "0.1.0"
