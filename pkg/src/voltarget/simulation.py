"""Monte Carlo engine for target-volatility portfolios on a Heston risky asset.

The risky asset and its variance are simulated on a uniform grid; the
portfolio is then rolled forward with the discrete self-financing update::

    V[n+1] = V[n] * (1 + a[n] * dS[n] / S[n] + (1 - a[n]) * dB[n] / B[n])

optionally with the Milstein correction
``- a (1 - a) / 2 * ((dS / S) ** 2 - nu dt)``.

Reproducibility: paths are grouped in fixed blocks of ``BLOCK_SIZE``; block ``k``
draws from ``SeedSequence(seed, spawn_key=(k,))`` with a path-major layout, so a
path's normals depend only on ``(seed, path_index)``. Blocks run on a thread
pool bounded by ``VOLTARGET_THREADS`` and are reduced in block order, so results
are bit-identical for any worker count.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .core_types import (
    HestonParams,
    MarketParams,
    OptionKind,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
)
from .errors import ConfigurationError, DomainError, NumericalError, ValidationError
from .greeks import Strategy

BLOCK_SIZE = 1024
DEFAULT_WEIGHT_CAP = 50.0
# relative to the initial portfolio value
VALUE_FLOOR_REL = 1e-12


class Scheme(str, enum.Enum):
    EULER = "euler"
    MILSTEIN = "milstein"


class Measure(str, enum.Enum):
    REAL_WORLD = "real_world"
    RISK_NEUTRAL = "risk_neutral"


@dataclass(frozen=True)
class SimConfig:
    """Grid size, path count, seed, scheme and measure of a simulation run.

    ``weight_cap`` bounds the plain strategy's weight ``sigma_hat / sigma`` when
    the simulated variance approaches zero; the capped strategy never needs it.
    """

    n_steps: int
    n_paths: int = 1
    seed: int = 0
    scheme: Scheme = Scheme.EULER
    measure: Measure = Measure.REAL_WORLD
    weight_cap: float = DEFAULT_WEIGHT_CAP

    def __post_init__(self) -> None:
        for name in ("n_steps", "n_paths", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_steps < 1:
            raise ValidationError(f"n_steps >= 1 violated: got {self.n_steps}")
        if self.n_paths < 1:
            raise ValidationError(f"n_paths >= 1 violated: got {self.n_paths}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
            object.__setattr__(self, "measure", Measure(self.measure))
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if not self.weight_cap > 0.0:
            raise ValidationError(f"weight_cap must be > 0, got {self.weight_cap!r}")

    def dt(self, mkt: MarketParams) -> float:
        if mkt.tau <= 0.0:
            raise DomainError("simulation needs T > t0")
        return mkt.tau / self.n_steps


@dataclass
class ClampCounts:
    """Guard events; ``steps`` is the number of path-steps they were counted over."""

    variance_truncations: int = 0
    weight_clamps: int = 0
    value_floors: int = 0
    steps: int = 0

    def __iadd__(self, other: "ClampCounts") -> "ClampCounts":
        self.variance_truncations += other.variance_truncations
        self.weight_clamps += other.weight_clamps
        self.value_floors += other.value_floors
        self.steps += other.steps
        return self

    @property
    def truncation_fraction(self) -> float:
        return self.variance_truncations / self.steps if self.steps else 0.0


@dataclass(frozen=True)
class HestonPaths:
    """Asset and variance on the grid; arrays are ``(n_paths, n_steps + 1)``.

    ``variance`` holds the positive part of the truncated Euler state.
    """

    times: np.ndarray
    asset: np.ndarray
    variance: np.ndarray
    log_increments: np.ndarray
    variance_truncations: int


@dataclass(frozen=True)
class SimulatedPath:
    times: np.ndarray
    asset: np.ndarray
    variance: np.ndarray
    weight: np.ndarray
    bond: np.ndarray
    portfolio: np.ndarray


@dataclass(frozen=True)
class PortfolioPaths:
    times: np.ndarray
    asset: np.ndarray
    variance: np.ndarray
    weight: np.ndarray
    bond: np.ndarray
    portfolio: np.ndarray
    counts: ClampCounts

    def path(self, i: int) -> SimulatedPath:
        return SimulatedPath(
            self.times, self.asset[i], self.variance[i], self.weight[i], self.bond, self.portfolio[i]
        )

    def __len__(self) -> int:
        return self.asset.shape[0]


@dataclass(frozen=True)
class MCResult:
    estimate: float
    standard_error: float
    # discounted terminal portfolio value, for the martingale check
    discounted_value: float
    discounted_value_se: float
    n_paths: int
    counts: ClampCounts


@dataclass(frozen=True)
class ConvergenceReport:
    scheme: Scheme
    step_sizes: tuple[float, ...]
    strong_errors: tuple[float, ...]
    standard_errors: tuple[float, ...]
    fitted_order: float
    order_halfwidth: float
    exact_reference: bool
    counts: ClampCounts = field(default_factory=ClampCounts)


def feller_check(p: HestonParams) -> tuple[bool, float]:
    """Whether ``2 kappa theta > xi^2`` holds strictly, and the margin."""
    margin = 2.0 * p.kappa * p.theta - p.xi * p.xi
    return margin > 0.0, margin


def worker_count() -> int:
    raw = os.environ.get("VOLTARGET_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"VOLTARGET_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigurationError(f"VOLTARGET_THREADS must be >= 1, got {n}")
    return n


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    return [(k, min(BLOCK_SIZE, n_paths - k * BLOCK_SIZE)) for k in range(-(-n_paths // BLOCK_SIZE))]


def _map_blocks(fn: Callable[[int, int], object], n_paths: int) -> list:
    blocks = _blocks(n_paths)
    workers = min(worker_count(), len(blocks))
    if workers == 1:
        return [fn(k, size) for k, size in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _block_normals(seed: int, block: int, size: int, n_steps: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    return rng.standard_normal((size, 2, n_steps))


def _drift(p: HestonParams, mkt: MarketParams, measure: Measure) -> float:
    return mkt.r if measure is Measure.RISK_NEUTRAL else p.mu


def _heston_block(
    p: HestonParams, mu: float, dt: float, n_steps: int, normals: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int]:
    """Full-truncation Euler variance and log-Euler asset for one block.

    Returns (variance positive part, log-increments, truncation count).
    """
    size = normals.shape[0]
    z1 = normals[:, 0, :]
    z2 = p.rho * z1 + math.sqrt(max(1.0 - p.rho * p.rho, 0.0)) * normals[:, 1, :]
    z2 = np.ascontiguousarray(z2.T)
    root_dt = math.sqrt(dt)
    raw = np.empty((n_steps + 1, size))
    raw[0] = p.nu0
    cur = raw[0]
    for n in range(n_steps):
        pos = np.maximum(cur, 0.0)
        cur = cur + p.kappa * (p.theta - pos) * dt + p.xi * root_dt * np.sqrt(pos) * z2[n]
        raw[n + 1] = cur
    truncations = int(np.count_nonzero(raw[1:] < 0.0))
    nu = np.maximum(raw.T, 0.0)
    nu_left = nu[:, :-1]
    dlog = (mu - 0.5 * nu_left) * dt + np.sqrt(nu_left * dt) * z1
    if not np.all(np.isfinite(dlog)):
        raise NumericalError("non-finite asset increment in Heston simulation")
    return nu, dlog, truncations


def _weights(
    nu: np.ndarray,
    cfg: StrategyConfig,
    strategy: Strategy,
    weight_cap: float,
    weight_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, int]:
    sigma = np.sqrt(nu)
    if weight_fn is not None:
        return np.asarray(weight_fn(sigma), dtype=float) * np.ones_like(sigma), 0
    with np.errstate(divide="ignore"):
        raw = cfg.sigma_hat / sigma
    if strategy is Strategy.MLVTS:
        cap = cfg.require_cap()
        return np.where(sigma <= cfg.sigma_hat / cap, cap, raw), 0
    clamped = raw > weight_cap
    return np.where(clamped, weight_cap, raw), int(np.count_nonzero(clamped[:, :-1]))


def step_factor(
    weight: np.ndarray,
    asset_return: np.ndarray,
    bond_return: float,
    variance_dt: np.ndarray,
    scheme: Scheme,
) -> np.ndarray:
    """One-step growth factor ``V[n+1] / V[n]`` of the discretized portfolio."""
    factor = 1.0 + weight * asset_return + (1.0 - weight) * bond_return
    if scheme is Scheme.MILSTEIN:
        factor = factor - 0.5 * weight * (1.0 - weight) * (asset_return * asset_return - variance_dt)
    return factor


def _roll_portfolio(v0: float, factor: np.ndarray) -> tuple[np.ndarray, int]:
    """Cumulative product of step factors, flooring non-positive values."""
    size, n_steps = factor.shape
    values = np.empty((size, n_steps + 1))
    values[:, 0] = v0
    np.cumprod(factor, axis=1, out=values[:, 1:])
    values[:, 1:] *= v0
    bad_rows = np.flatnonzero(np.any(factor <= 0.0, axis=1))
    floor = VALUE_FLOOR_REL * v0
    floors = 0
    for i in bad_rows:
        cur = v0
        for n in range(n_steps):
            cur = cur * factor[i, n]
            if cur <= 0.0:
                cur = floor
                floors += 1
            values[i, n + 1] = cur
    return values, floors


def _portfolio_block(
    v0: float,
    dlog: np.ndarray,
    nu: np.ndarray,
    dt: float,
    r: float,
    cfg: StrategyConfig,
    strategy: Strategy,
    sim: SimConfig,
    weight_fn=None,
) -> tuple[np.ndarray, np.ndarray, ClampCounts]:
    weight, clamps = _weights(nu, cfg, strategy, sim.weight_cap, weight_fn)
    factor = step_factor(weight[:, :-1], np.expm1(dlog), math.expm1(r * dt), nu[:, :-1] * dt, sim.scheme)
    values, floors = _roll_portfolio(v0, factor)
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite portfolio value")
    return values, weight, ClampCounts(0, clamps, floors, dlog.size)


def simulate_heston(p: HestonParams, sim: SimConfig, mkt: MarketParams) -> HestonPaths:
    """Simulate ``sim.n_paths`` Heston paths on ``[t0, T]``.

    Variance: full-truncation Euler (drift and diffusion read ``max(nu, 0)``).
    Asset: exact log-Euler step given the left-point variance.
    """
    dt = sim.dt(mkt)
    mu = _drift(p, mkt, sim.measure)

    def run(block: int, size: int):
        return _heston_block(p, mu, dt, sim.n_steps, _block_normals(sim.seed, block, size, sim.n_steps))

    parts = _map_blocks(run, sim.n_paths)
    nu = np.concatenate([x[0] for x in parts])
    dlog = np.concatenate([x[1] for x in parts])
    log_s = np.zeros_like(nu)
    np.cumsum(dlog, axis=1, out=log_s[:, 1:])
    return HestonPaths(
        times=mkt.t0 + dt * np.arange(sim.n_steps + 1),
        asset=p.s0 * np.exp(log_s),
        variance=nu,
        log_increments=dlog,
        variance_truncations=sum(x[2] for x in parts),
    )


def simulate_portfolio(
    paths: HestonPaths,
    state: PortfolioState,
    cfg: StrategyConfig,
    mkt: MarketParams,
    sim: SimConfig,
    strategy: Strategy | str = Strategy.VTS,
    weight_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> PortfolioPaths:
    """Roll the target-volatility portfolio along simulated asset paths.

    The portfolio starts at ``state.v`` and the bond at ``state.b``; the asset
    starting value is taken from the paths. ``weight_fn`` overrides the
    strategy's weight as a function of instantaneous volatility.
    """
    strategy = Strategy(strategy)
    dt = sim.dt(mkt)
    values, weight, counts = _portfolio_block(
        state.v, paths.log_increments, paths.variance, dt, mkt.r, cfg, strategy, sim, weight_fn
    )
    counts.variance_truncations = paths.variance_truncations
    bond = state.b * np.exp(mkt.r * (paths.times - mkt.t0))
    return PortfolioPaths(paths.times, paths.asset, paths.variance, weight, bond, values, counts)


def mc_price(
    p: HestonParams,
    state: PortfolioState,
    cfg: StrategyConfig,
    mkt: MarketParams,
    opt: OptionSpec,
    sim: SimConfig,
    strategy: Strategy | str = Strategy.VTS,
) -> MCResult:
    """Risk-neutral Monte Carlo price with its standard error."""
    if sim.measure is not Measure.RISK_NEUTRAL:
        raise ConfigurationError("mc_price requires the risk-neutral measure")
    strategy = Strategy(strategy)
    dt = sim.dt(mkt)

    def run(block: int, size: int):
        nu, dlog, trunc = _heston_block(p, mkt.r, dt, sim.n_steps, _block_normals(sim.seed, block, size, sim.n_steps))
        values, _, counts = _portfolio_block(state.v, dlog, nu, dt, mkt.r, cfg, strategy, sim)
        counts.variance_truncations = trunc
        return values[:, -1].copy(), counts

    parts = _map_blocks(run, sim.n_paths)
    terminal = np.concatenate([x[0] for x in parts])
    counts = ClampCounts()
    for _, c in parts:
        counts += c
    disc = mkt.discount()
    if opt.kind is OptionKind.CALL:
        payoff = np.maximum(terminal - opt.strike, 0.0)
    else:
        payoff = np.maximum(opt.strike - terminal, 0.0)
    n = terminal.size
    est, se = _mean_se(disc * payoff)
    dv, dv_se = _mean_se(disc * terminal)
    return MCResult(est, se, dv, dv_se, n, counts)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


def _validate_ladder(ladder: Iterable[float], tau: float) -> tuple[list[float], list[int]]:
    steps = sorted((float(x) for x in ladder), reverse=True)
    if len(steps) < 2:
        raise ConfigurationError("convergence ladder needs at least two step sizes")
    if len(set(steps)) != len(steps):
        raise ConfigurationError("convergence ladder step sizes must be distinct")
    counts = []
    for dt in steps:
        if not dt > 0.0:
            raise ConfigurationError(f"step size must be > 0, got {dt!r}")
        n = round(tau / dt)
        if n < 1 or abs(n * dt - tau) > 1e-9 * tau:
            raise ConfigurationError(f"step size {dt!r} does not divide the horizon {tau!r}")
        counts.append(n)
    finest = counts[-1]
    for n in counts:
        if finest % n:
            raise ConfigurationError(f"ladder is not nested: {finest} steps is not a multiple of {n}")
    return [tau / n for n in counts], counts


def convergence_study(
    p: HestonParams,
    state: PortfolioState,
    cfg: StrategyConfig,
    mkt: MarketParams,
    sim: SimConfig,
    ladder: Sequence[float],
    strategy: Strategy | str = Strategy.VTS,
    refine: int = 4,
) -> ConvergenceReport:
    """Strong error ``E|V_T - V_T^dt|`` on a nested ladder and its fitted order.

    All rungs share the Brownian increments of one fine simulation. With constant
    variance the exact lognormal portfolio value is the reference; otherwise the
    Milstein portfolio on a grid ``refine`` times finer than the finest rung is.
    ``sim.n_steps`` is ignored.
    """
    strategy = Strategy(strategy)
    steps, counts = _validate_ladder(ladder, mkt.tau)
    exact = p.constant_variance
    n_ref = counts[-1] if exact else counts[-1] * refine
    dt_ref = mkt.tau / n_ref
    mu = _drift(p, mkt, sim.measure)
    ref_sim = SimConfig(n_ref, sim.n_paths, sim.seed, Scheme.MILSTEIN, sim.measure, sim.weight_cap)

    def run(block: int, size: int):
        normals = _block_normals(sim.seed, block, size, n_ref)
        nu, dlog, trunc = _heston_block(p, mu, dt_ref, n_ref, normals)
        if exact:
            sigma = math.sqrt(p.theta)
            w, _ = _weights(np.array([[p.theta]]), cfg, strategy, sim.weight_cap)
            a = float(w[0, 0])
            brownian = math.sqrt(dt_ref) * normals[:, 0, :].sum(axis=1)
            ref = state.v * np.exp(
                (a * mu + (1.0 - a) * mkt.r - 0.5 * a * a * sigma * sigma) * mkt.tau + a * sigma * brownian
            )
        else:
            ref = _portfolio_block(state.v, dlog, nu, dt_ref, mkt.r, cfg, strategy, ref_sim)[0][:, -1]
        log_s = np.zeros((size, n_ref + 1))
        np.cumsum(dlog, axis=1, out=log_s[:, 1:])
        errors = []
        counts_blk = ClampCounts(variance_truncations=trunc)
        for n in counts:
            m = n_ref // n
            coarse_dlog = np.diff(log_s[:, ::m], axis=1)
            values, _, c = _portfolio_block(
                state.v, coarse_dlog, nu[:, ::m], mkt.tau / n, mkt.r, cfg, strategy, sim
            )
            c.variance_truncations = 0
            counts_blk += c
            errors.append(np.abs(values[:, -1] - ref))
        return errors, counts_blk

    parts = _map_blocks(run, sim.n_paths)
    strong, ses = [], []
    for i in range(len(counts)):
        mean, se = _mean_se(np.concatenate([x[0][i] for x in parts]))
        strong.append(mean)
        ses.append(se)
    total = ClampCounts()
    for _, c in parts:
        total += c
    order, halfwidth = fit_order(steps, strong)
    return ConvergenceReport(
        sim.scheme, tuple(steps), tuple(strong), tuple(ses), order, halfwidth, exact, total
    )


def fit_order(step_sizes: Sequence[float], errors: Sequence[float]) -> tuple[float, float]:
    """Log-log least-squares slope and its 95% confidence half-width."""
    x, y = np.log(np.asarray(step_sizes)), np.asarray(errors, dtype=float)
    if len(x) < 2:
        raise ConfigurationError("order fit needs at least two rungs")
    if np.any(y <= 0.0):
        raise NumericalError("strong errors must be positive to fit an order")
    fit = stats.linregress(x, np.log(y))
    dof = len(x) - 2
    halfwidth = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else math.nan
    return float(fit.slope), halfwidth
