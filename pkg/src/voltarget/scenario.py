"""JSON scenario files bundling every input a CLI command may need.

A scenario is one top-level object::

    {
      "market":    {"r": 0.05, "t0": 0.0, "T": 1.0},
      "strategy":  {"sigma_hat": 0.2, "leverage_cap": 2.0},
      "option":    {"strike": 10.0, "kind": "call"},
      "portfolio": {"v": 12.0, "s": 10.0, "b": 1.0},
      "sigma":     0.08,
      "vol_curve": {"breakpoints": [0.0, 1.0], "values": [0.08]},
      "heston":    {"kappa": 0.6067, "theta": 0.2207, "xi": 0.2928, "rho": -0.75,
                    "nu0": 0.2154, "mu": 0.0824, "s0": 100.0},
      "sim":       {"n_steps": 1000, "n_paths": 1, "seed": 42, "scheme": "euler",
                    "measure": "real_world", "weight_cap": 50.0},
      "ladder":    [0.015625, 0.0078125]
    }

``market``, ``strategy``, ``option`` and ``portfolio`` are required; the rest
is checked only by the commands that use it. ``sigma`` is the constant risky
volatility used by the Greeks and, absent a ``vol_curve``, by capped pricing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .core_types import (
    HestonParams,
    MarketParams,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
    VolCurve,
    heston_from_dict,
    market_from_dict,
    option_from_dict,
    portfolio_from_dict,
    strategy_from_dict,
    vol_curve_from_dict,
)
from .errors import ConfigurationError, ValidationError
from .simulation import SimConfig

_KEYS = {"market", "strategy", "option", "portfolio", "sigma", "vol_curve", "heston", "sim", "ladder"}

# sweepable parameter -> (block, field)
SWEEP_TARGETS = {
    "v": ("portfolio", "v"),
    "s": ("portfolio", "s"),
    "strike": ("option", "strike"),
    "sigma": (None, "sigma"),
    "sigma_hat": ("strategy", "sigma_hat"),
    "leverage_cap": ("strategy", "leverage_cap"),
    "r": ("market", "r"),
    "T": ("market", "T"),
}


@dataclass(frozen=True)
class Scenario:
    market: MarketParams
    strategy: StrategyConfig
    option: OptionSpec
    portfolio: PortfolioState
    sigma: Optional[float] = None
    vol_curve: Optional[VolCurve] = None
    heston: Optional[HestonParams] = None
    sim: Optional[SimConfig] = None
    ladder: Optional[tuple[float, ...]] = None

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigurationError(f"scenario is missing required block(s): {', '.join(missing)}")

    def constant_sigma(self) -> float:
        """Constant risky volatility from ``sigma`` or a one-level ``vol_curve``."""
        if self.sigma is not None:
            return self.sigma
        if self.vol_curve is not None and self.vol_curve.is_constant:
            return self.vol_curve.values[0]
        raise ConfigurationError("scenario needs 'sigma' (or a constant vol_curve) for this command")

    def curve(self) -> VolCurve:
        if self.vol_curve is not None:
            return self.vol_curve
        if self.sigma is None:
            raise ConfigurationError("capped-strategy pricing needs 'vol_curve' or 'sigma'")
        return VolCurve.constant(self.sigma, self.market.t0, self.market.T)

    def with_value(self, name: str, value: float) -> "Scenario":
        """Copy with one sweepable parameter replaced (re-validated)."""
        try:
            block, attr = SWEEP_TARGETS[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown sweep parameter {name!r}; choose from {', '.join(SWEEP_TARGETS)}"
            ) from None
        if block is None:
            return replace(self, **{attr: _sigma(value)})
        return replace(self, **{block: replace(getattr(self, block), **{attr: value})})


def _sigma(value: Any) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"sigma must be a real number, got {value!r}") from exc
    if not value > 0.0:
        raise ValidationError(f"sigma > 0 violated: got {value!r}")
    return value


def _sim_from_dict(data: Mapping[str, Any]) -> SimConfig:
    if not isinstance(data, Mapping):
        raise ConfigurationError("sim block must be a JSON object")
    unknown = set(data) - {f.name for f in fields(SimConfig)}
    if unknown:
        raise ConfigurationError(f"unknown sim field(s): {', '.join(sorted(unknown))}")
    try:
        return SimConfig(**data)
    except TypeError as exc:
        raise ConfigurationError(f"incomplete sim block: {exc}") from exc


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    if not isinstance(data, Mapping):
        raise ConfigurationError("scenario must be a single JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigurationError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
    for key in ("market", "strategy", "option", "portfolio"):
        if key not in data:
            raise ConfigurationError(f"scenario is missing required block: {key}")
    ladder = data.get("ladder")
    return Scenario(
        market=market_from_dict(data["market"]),
        strategy=strategy_from_dict(data["strategy"]),
        option=option_from_dict(data["option"]),
        portfolio=portfolio_from_dict(data["portfolio"]),
        sigma=_sigma(data["sigma"]) if data.get("sigma") is not None else None,
        vol_curve=vol_curve_from_dict(data["vol_curve"]) if data.get("vol_curve") else None,
        heston=heston_from_dict(data["heston"]) if data.get("heston") else None,
        sim=_sim_from_dict(data["sim"]) if data.get("sim") else None,
        ladder=tuple(float(x) for x in ladder) if ladder else None,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def parse_sweep(spec: str) -> tuple[str, list[float]]:
    """``param:lo:hi:n`` -> (param, n evenly spaced values including both ends)."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigurationError(f"--sweep expects param:lo:hi:n, got {spec!r}")
    name, lo, hi, n = parts
    if name not in SWEEP_TARGETS:
        raise ConfigurationError(f"unknown sweep parameter {name!r}; choose from {', '.join(SWEEP_TARGETS)}")
    try:
        lo_f, hi_f, count = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigurationError(f"--sweep bounds must be numbers and n an integer: {spec!r}") from exc
    if count < 1:
        raise ConfigurationError("--sweep needs n >= 1")
    if count == 1:
        return name, [lo_f]
    step = (hi_f - lo_f) / (count - 1)
    return name, [lo_f + i * step for i in range(count - 1)] + [hi_f]


def parse_ladder(spec: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in spec.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigurationError(f"--ladder expects comma-separated step sizes, got {spec!r}") from exc


def override_sim(sim: Optional[SimConfig], **changes: Any) -> Optional[SimConfig]:
    """Apply non-None CLI overrides to the scenario's sim block."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if sim is None:
        if "n_steps" not in changes:
            return None
        return SimConfig(**changes)
    return replace(sim, **changes) if changes else sim


def ladder_or_default(scenario: Scenario, flag: Optional[Sequence[float]]) -> tuple[float, ...]:
    if flag is not None:
        return tuple(flag)
    if scenario.ladder is not None:
        return scenario.ladder
    tau = scenario.market.tau
    return tuple(tau * 2.0**-k for k in range(6, 11))
