"""Closed-form European option prices on target-volatility portfolios.

Both portfolios are lognormal under the risk-neutral measure: the plain
strategy has constant volatility ``sigma_hat``, the leverage-capped strategy
has deterministic volatility ``min(L sigma(t), sigma_hat)``. Every price is
therefore a Black formula in the total variance accumulated to maturity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core_types import (
    MarketParams,
    OptionKind,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
    VolCurve,
    effective_vol,
)
from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

PARITY_RTOL = 1e-12


def norm_cdf(x: float) -> float:
    """Standard normal CDF through ``erfc``, accurate in both tails."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class PriceResult:
    price: float
    d1: float
    d2: float
    total_variance: float


def _black(v: float, strike: float, r: float, tau: float, var: float, kind: OptionKind) -> PriceResult:
    """Black price of a lognormal underlying with forward ``v e^{r tau}``.

    ``var`` is the total log-variance to maturity.
    """
    call = kind is OptionKind.CALL
    if strike == 0.0:
        return PriceResult(v if call else 0.0, math.inf, math.inf, var)
    disc = math.exp(-r * tau)
    if var == 0.0:
        # at expiry (or with no diffusion) the payoff is known
        fwd_gap = v - strike * disc
        d = math.copysign(math.inf, fwd_gap) if fwd_gap else 0.0
        price = max(fwd_gap, 0.0) if call else max(-fwd_gap, 0.0)
        return PriceResult(price, d, d, 0.0)
    sd = math.sqrt(var)
    d1 = (math.log(v / strike) + r * tau + 0.5 * var) / sd
    d2 = d1 - sd
    if call:
        price = v * norm_cdf(d1) - strike * disc * norm_cdf(d2)
    else:
        price = strike * disc * norm_cdf(-d2) - v * norm_cdf(-d1)
    # rounding can push deep out-of-the-money values a hair below zero
    return PriceResult(max(price, 0.0), d1, d2, var)


def bs_price(
    spot: float,
    strike: float,
    r: float,
    vol: float,
    tau: float,
    kind: OptionKind | str = OptionKind.CALL,
) -> PriceResult:
    """Textbook Black-Scholes price of a European option on a non-dividend asset."""
    kind = OptionKind(kind)
    if tau < 0.0:
        raise DomainError(f"time to maturity must be >= 0, got {tau!r}")
    if strike < 0.0:
        raise DomainError(f"strike must be >= 0, got {strike!r}")
    if tau > 0.0 and (spot <= 0.0 or vol <= 0.0):
        raise DomainError(f"spot and vol must be > 0 before expiry, got spot={spot!r}, vol={vol!r}")
    return _black(spot, strike, r, tau, vol * vol * tau, kind)


def vts_price(
    state: PortfolioState, cfg: StrategyConfig, mkt: MarketParams, opt: OptionSpec
) -> PriceResult:
    """Price of a call or put written on the plain target-volatility portfolio.

    The result does not depend on the volatility of the risky asset, whatever
    its dynamics: the portfolio itself diffuses at ``sigma_hat``.
    """
    var = cfg.sigma_hat * cfg.sigma_hat * mkt.tau
    return _black(state.v, opt.strike, mkt.r, mkt.tau, var, opt.kind)


def total_variance(curve: VolCurve, cfg: StrategyConfig, mkt: MarketParams) -> float:
    """Integral of the squared capped portfolio volatility over ``[t0, T]``.

    Exact for a piecewise-constant curve: one term per segment.
    """
    cfg.require_cap()
    total = 0.0
    for sigma, length in curve.segments(mkt.t0, mkt.T):
        vol = effective_vol(sigma, cfg)
        total += vol * vol * length
    return total


def mlvts_price(
    state: PortfolioState,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    curve: VolCurve,
) -> PriceResult:
    """Price of a call or put on the leverage-capped target-volatility portfolio."""
    var = total_variance(curve, cfg, mkt)
    return _black(state.v, opt.strike, mkt.r, mkt.tau, var, opt.kind)


def parity_gap(
    call_price: float,
    put_price: float,
    state: PortfolioState,
    opt: OptionSpec,
    mkt: MarketParams,
) -> float:
    """Residual ``C - P - (v - K e^{-r tau})``; zero for consistent prices."""
    return call_price - put_price - (state.v - opt.strike * mkt.discount())


def parity_tolerance(state: PortfolioState, opt: OptionSpec) -> float:
    """Largest acceptable ``|parity_gap|`` for prices from this module."""
    return PARITY_RTOL * max(1.0, state.v, opt.strike)
