"""Validated value types and the allocation rules of target-volatility portfolios.

Times are year fractions, rates and volatilities are decimals. Every type is a
frozen dataclass that validates itself on construction, so instances can be
shared freely between threads.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError, ValidationError

ArrayLike = Union[float, np.ndarray]


def _finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


def _positive(name: str, value: float) -> float:
    value = _finite(name, value)
    if value <= 0.0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    return value


class OptionKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class MarketParams:
    """Risk-free rate ``r`` and the valuation/maturity times ``t0 <= T``.

    Negative rates are accepted: all pricing formulas stay well defined even
    though the model is usually stated for ``r > 0``.
    """

    r: float
    t0: float
    T: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", _finite("r", self.r))
        object.__setattr__(self, "t0", _finite("t0", self.t0))
        object.__setattr__(self, "T", _finite("T", self.T))
        if self.T < self.t0:
            raise ValidationError(f"T >= t0 violated: T={self.T!r} < t0={self.t0!r}")

    @property
    def tau(self) -> float:
        """Time to maturity ``T - t0``."""
        return self.T - self.t0

    @property
    def negative_rate(self) -> bool:
        return self.r < 0.0

    def discount(self) -> float:
        return math.exp(-self.r * self.tau)


@dataclass(frozen=True)
class StrategyConfig:
    """Target volatility and, for the leverage-capped strategy, the cap ``L >= 1``."""

    sigma_hat: float
    leverage_cap: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma_hat", _positive("sigma_hat", self.sigma_hat))
        if self.leverage_cap is not None:
            cap = _finite("leverage_cap", self.leverage_cap)
            if cap < 1.0:
                raise ValidationError(f"leverage_cap >= 1 violated: got {cap!r}")
            object.__setattr__(self, "leverage_cap", cap)

    @property
    def threshold(self) -> float:
        """Risky volatility ``sigma_hat / L`` below which the cap binds."""
        return self.sigma_hat / self.require_cap()

    def require_cap(self) -> float:
        if self.leverage_cap is None:
            raise ConfigurationError("leverage_cap is required for the leverage-capped strategy")
        return self.leverage_cap


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    kind: OptionKind = OptionKind.CALL

    def __post_init__(self) -> None:
        strike = _finite("strike", self.strike)
        if strike < 0.0:
            raise ValidationError(f"strike >= 0 violated: got {strike!r}")
        object.__setattr__(self, "strike", strike)
        try:
            object.__setattr__(self, "kind", OptionKind(self.kind))
        except ValueError as exc:
            raise ValidationError(f"kind must be 'call' or 'put', got {self.kind!r}") from exc


@dataclass(frozen=True)
class PortfolioState:
    """Portfolio value ``v``, risky asset price ``s`` and bond price ``b``."""

    v: float
    s: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("v", "s", "b"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))


@dataclass(frozen=True)
class VolCurve:
    """Piecewise-constant deterministic volatility.

    ``values[i]`` applies on ``[breakpoints[i], breakpoints[i + 1])``; the last
    segment is closed on the right.
    """

    breakpoints: Sequence[float]
    values: Sequence[float]

    def __post_init__(self) -> None:
        bps = tuple(_finite("breakpoint", t) for t in self.breakpoints)
        vals = tuple(_finite("vol value", x) for x in self.values)
        if len(bps) < 2:
            raise ValidationError("VolCurve needs at least two breakpoints")
        if len(vals) != len(bps) - 1:
            raise ValidationError(
                f"VolCurve needs len(values) == len(breakpoints) - 1, got {len(vals)} and {len(bps)}"
            )
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValidationError("VolCurve breakpoints must be strictly increasing")
        if any(x <= 0.0 for x in vals):
            raise ValidationError("VolCurve values must be strictly positive")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, sigma: float, t0: float, T: float) -> "VolCurve":
        if T <= t0:
            raise ValidationError("a constant VolCurve needs T > t0")
        return cls((t0, T), (sigma,))

    def covers(self, t0: float, T: float) -> bool:
        return self.breakpoints[0] <= t0 and self.breakpoints[-1] >= T

    def segments(self, t0: float, T: float) -> list[tuple[float, float]]:
        """(volatility, length) pairs of the curve restricted to ``[t0, T]``."""
        if not self.covers(t0, T):
            raise DomainError(
                f"VolCurve on [{self.breakpoints[0]}, {self.breakpoints[-1]}] does not cover [{t0}, {T}]"
            )
        out = []
        for a, b, sigma in zip(self.breakpoints, self.breakpoints[1:], self.values):
            lo, hi = max(a, t0), min(b, T)
            if hi > lo:
                out.append((sigma, hi - lo))
        return out

    def __call__(self, t: float) -> float:
        if t < self.breakpoints[0] or t > self.breakpoints[-1]:
            raise DomainError(f"t={t} outside VolCurve support")
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(i, len(self.values) - 1)]

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1


@dataclass(frozen=True)
class HestonParams:
    kappa: float
    theta: float
    xi: float
    rho: float
    nu0: float
    mu: float
    s0: float

    def __post_init__(self) -> None:
        for name in ("kappa", "theta", "nu0", "s0"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        xi = _finite("xi", self.xi)
        # xi == 0 is allowed: the variance then decays deterministically to theta
        if xi < 0.0:
            raise ValidationError(f"xi >= 0 violated: got {xi!r}")
        object.__setattr__(self, "xi", xi)
        rho = _finite("rho", self.rho)
        if not -1.0 <= rho <= 1.0:
            raise ValidationError(f"rho in [-1, 1] violated: got {rho!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mu", _finite("mu", self.mu))

    @property
    def constant_variance(self) -> bool:
        """True when the variance path is identically ``theta``."""
        return self.xi == 0.0 and self.nu0 == self.theta


def vts_weight(sigma: ArrayLike, cfg: StrategyConfig) -> ArrayLike:
    """Risky weight ``sigma_hat / sigma`` of the plain target-volatility strategy."""
    sigma = _check_sigma(sigma)
    return cfg.sigma_hat / sigma


def mlvts_weight(sigma: ArrayLike, cfg: StrategyConfig) -> ArrayLike:
    """Risky weight ``min(L, sigma_hat / sigma)`` of the leverage-capped strategy.

    At ``sigma == sigma_hat / L`` the cap branch is taken; both branches agree there.
    """
    cap = cfg.require_cap()
    sigma = _check_sigma(sigma)
    if np.ndim(sigma):
        return np.where(sigma <= cfg.sigma_hat / cap, cap, cfg.sigma_hat / sigma)
    return cap if sigma <= cfg.sigma_hat / cap else cfg.sigma_hat / sigma


def effective_vol(sigma: ArrayLike, cfg: StrategyConfig) -> ArrayLike:
    """Portfolio volatility ``min(L * sigma, sigma_hat)`` of the capped strategy."""
    return mlvts_weight(sigma, cfg) * _check_sigma(sigma)


def _check_sigma(sigma: ArrayLike) -> ArrayLike:
    if np.ndim(sigma):
        sigma = np.asarray(sigma, dtype=float)
        if not np.all(sigma > 0.0):
            raise DomainError("volatility must be strictly positive")
        return sigma
    sigma = float(sigma)
    if not sigma > 0.0:
        raise DomainError(f"volatility must be strictly positive, got {sigma!r}")
    return sigma


def _from_mapping(cls, data: Mapping[str, Any], what: str):
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{what} block must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"unknown {what} field(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"incomplete {what} block: {exc}") from exc


def market_from_dict(data: Mapping[str, Any]) -> MarketParams:
    return _from_mapping(MarketParams, data, "market")


def strategy_from_dict(data: Mapping[str, Any]) -> StrategyConfig:
    return _from_mapping(StrategyConfig, data, "strategy")


def option_from_dict(data: Mapping[str, Any]) -> OptionSpec:
    return _from_mapping(OptionSpec, data, "option")


def portfolio_from_dict(data: Mapping[str, Any]) -> PortfolioState:
    return _from_mapping(PortfolioState, data, "portfolio")


def vol_curve_from_dict(data: Mapping[str, Any]) -> VolCurve:
    return _from_mapping(VolCurve, data, "vol_curve")


def heston_from_dict(data: Mapping[str, Any]) -> HestonParams:
    return _from_mapping(HestonParams, data, "heston")


def _read_json(path: Union[str, Path]) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc


def load_vol_curve(path: Union[str, Path]) -> VolCurve:
    return vol_curve_from_dict(_read_json(path))


def load_heston(path: Union[str, Path]) -> HestonParams:
    return heston_from_dict(_read_json(path))
