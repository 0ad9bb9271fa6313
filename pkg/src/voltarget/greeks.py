"""Hedging sensitivities of options on target-volatility portfolios.

All Greeks assume a risky asset with constant volatility ``sigma``. Sensitivities
with respect to the asset price follow from the chain rule through the number
of shares held by the portfolio::

    d price / dS     = (d price / dv) * phi
    d2 price / dS2   = (d2 price / dv2) * phi ** 2

with ``phi = v * weight / s``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from .core_types import (
    MarketParams,
    OptionKind,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
)
from .errors import DomainError, NumericalError
from .pricing import _black, norm_cdf, norm_pdf

# step sizes chosen from a sweep over 1e-3..1e-8: smallest combined
# truncation and rounding error for vol-scale and price-scale bumps
H_SIGMA = 1e-6
H_V_REL = 1e-5


class Strategy(str, enum.Enum):
    VTS = "vts"
    MLVTS = "mlvts"


class Branch(str, enum.Enum):
    PLAIN_VTS = "plain_vts"
    CAP_BINDING = "cap_binding"
    CAP_SLACK = "cap_slack"


@dataclass(frozen=True)
class GreekReport:
    vega: float
    delta: float
    gamma: float
    branch: Branch


@dataclass(frozen=True)
class PortfolioDecomposition:
    """Shares ``phi`` and bonds ``psi`` held by a self-financing portfolio."""

    phi: float
    psi: float

    def value(self, state: PortfolioState) -> float:
        return self.phi * state.s + self.psi * state.b


def decompose(state: PortfolioState, weight: float) -> PortfolioDecomposition:
    if not math.isfinite(weight):
        raise DomainError(f"weight must be finite, got {weight!r}")
    return PortfolioDecomposition(
        phi=state.v * weight / state.s,
        psi=state.v * (1.0 - weight) / state.b,
    )


def branch(sigma: float, cfg: StrategyConfig, strategy: Strategy | str) -> Branch:
    """Which pricing regime applies; the cap is reported binding at ``sigma == sigma_hat / L``."""
    if Strategy(strategy) is Strategy.VTS:
        return Branch.PLAIN_VTS
    return Branch.CAP_BINDING if sigma <= cfg.threshold else Branch.CAP_SLACK


def _regime(sigma: float, cfg: StrategyConfig, strategy: Strategy | str) -> tuple[Branch, float, float]:
    """(branch, risky weight, portfolio volatility)."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    br = branch(sigma, cfg, strategy)
    if br is Branch.CAP_BINDING:
        cap = cfg.require_cap()
        return br, cap, cap * sigma
    return br, cfg.sigma_hat / sigma, cfg.sigma_hat


def _d1(state: PortfolioState, mkt: MarketParams, opt: OptionSpec, vol: float) -> float:
    return _black(state.v, opt.strike, mkt.r, mkt.tau, vol * vol * mkt.tau, OptionKind.CALL).d1


def portfolio_delta(
    state: PortfolioState, sigma: float, cfg: StrategyConfig, strategy: Strategy | str = Strategy.VTS
) -> float:
    """Sensitivity of the portfolio value to the risky asset price, ``v * weight / s``."""
    _, weight, _ = _regime(sigma, cfg, strategy)
    return state.v * weight / state.s


def vega(
    state: PortfolioState,
    sigma: float,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    strategy: Strategy | str,
) -> float:
    """Sensitivity of the option price to the risky asset volatility.

    Zero for the plain strategy and whenever the cap is slack; calls and puts
    share the same value.
    """
    br, weight, vol = _regime(sigma, cfg, strategy)
    if br is not Branch.CAP_BINDING:
        return 0.0
    d1 = _d1(state, mkt, opt, vol)
    return state.v * norm_pdf(d1) * weight * math.sqrt(mkt.tau)


def delta(
    state: PortfolioState,
    sigma: float,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    strategy: Strategy | str,
) -> float:
    _, weight, vol = _regime(sigma, cfg, strategy)
    dprice_dv = norm_cdf(_d1(state, mkt, opt, vol))
    if opt.kind is OptionKind.PUT:
        dprice_dv -= 1.0
    return state.v * weight / state.s * dprice_dv


def gamma(
    state: PortfolioState,
    sigma: float,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    strategy: Strategy | str,
) -> float:
    """Second derivative in the asset price; identical for calls and puts."""
    if mkt.tau <= 0.0:
        raise DomainError("gamma is singular at expiry (tau == 0)")
    br, weight, vol = _regime(sigma, cfg, strategy)
    density = norm_pdf(_d1(state, mkt, opt, vol))
    root_tau = math.sqrt(mkt.tau)
    v, s = state.v, state.s
    if br is Branch.CAP_BINDING:
        return weight * v / (s * s * sigma * root_tau) * density
    return v * cfg.sigma_hat / (s * s * sigma * sigma * root_tau) * density


def greeks(
    state: PortfolioState,
    sigma: float,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    strategy: Strategy | str,
) -> GreekReport:
    return GreekReport(
        vega=vega(state, sigma, cfg, mkt, opt, strategy),
        delta=delta(state, sigma, cfg, mkt, opt, strategy),
        gamma=gamma(state, sigma, cfg, mkt, opt, strategy),
        branch=branch(sigma, cfg, strategy),
    )


def vega_argmax_v(cfg: StrategyConfig, mkt: MarketParams, opt: OptionSpec, sigma: float) -> float:
    """Portfolio value at which the capped-strategy Vega peaks.

    Only defined while the cap binds; above ``sigma_hat / L`` Vega is zero for every ``v``.
    """
    cap = cfg.require_cap()
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    if sigma > cfg.threshold:
        raise DomainError(
            f"sigma={sigma!r} above sigma_hat/L={cfg.threshold!r}: Vega is identically zero"
        )
    return opt.strike * math.exp(-mkt.tau * (mkt.r - 0.5 * cap * cap * sigma * sigma))


@dataclass(frozen=True)
class FDCheck:
    closed_form: float
    fd_estimate: float
    abs_gap: float

    @property
    def rel_gap(self) -> float:
        scale = abs(self.closed_form)
        return self.abs_gap / scale if scale else self.abs_gap


def central_difference(f: Callable[[float], float], x: float, h: float, order: int = 1) -> float:
    """Central difference of order 1 or 2 with step ``h``."""
    if not h > 0.0:
        raise DomainError(f"step must be > 0, got {h!r}")
    up, down = f(x + h), f(x - h)
    if order == 1:
        vals = (up, down)
        est = (up - down) / (2.0 * h)
    elif order == 2:
        mid = f(x)
        vals = (up, mid, down)
        est = (up - 2.0 * mid + down) / (h * h)
    else:
        raise ValueError("order must be 1 or 2")
    if not all(math.isfinite(y) for y in vals):
        raise NumericalError(f"non-finite evaluation near x={x!r}: {vals}")
    return est


def fd_check(
    pricer: Callable[[float], float],
    x: float,
    h: float,
    closed_form: float,
    order: int = 1,
) -> FDCheck:
    """Compare a closed-form derivative with a central difference of ``pricer`` at ``x``."""
    est = central_difference(pricer, x, h, order)
    return FDCheck(closed_form, est, abs(est - closed_form))
