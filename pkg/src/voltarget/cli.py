"""Command-line front end.

Subcommands: ``price``, ``greeks``, ``simulate``, ``mcprice``, ``converge``.
Flags override the matching scenario fields. Exit codes: 0 success,
1 numerical failure, 2 configuration or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from .core_types import OptionKind, VolCurve
from .errors import ConfigurationError, DomainError, NumericalError, ValidationError
from .greeks import Strategy, greeks
from .pricing import PriceResult, mlvts_price, vts_price
from .scenario import (
    Scenario,
    ladder_or_default,
    load_scenario,
    override_sim,
    parse_ladder,
    parse_sweep,
)
from .simulation import Measure, convergence_study, mc_price, simulate_heston, simulate_portfolio

PRICE_HEADER = ("strategy", "kind", "v", "strike", "sigma", "price", "d1", "d2", "total_variance")
GREEKS_HEADER = ("strategy", "kind", "v", "s", "strike", "sigma", "vega", "delta", "gamma", "branch")
PATH_HEADER = ("t", "S", "nu", "alpha", "B", "V")
MC_HEADER = (
    "strategy", "kind", "estimate", "se", "closed_form", "z_score",
    "discounted_value", "discounted_value_se", "n_paths", "n_steps", "seed",
)
CONVERGENCE_HEADER = ("dt", "strong_error", "se")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Round-trip formatting: ``repr`` for floats, blank for missing values."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(getattr(x, "value", x))


def _write_csv(rows: Iterable[Sequence], header: Sequence[str], out: Optional[str], stdout: TextIO) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.option is not None:
        sc = replace(sc, option=replace(sc.option, kind=args.option))
    if getattr(args, "sigma", None) is not None:
        sc = sc.with_value("sigma", args.sigma)
    return sc


def _sweep(sc: Scenario, spec: Optional[str]) -> list[Scenario]:
    if spec is None:
        return [sc]
    name, values = parse_sweep(spec)
    return [sc.with_value(name, x) for x in values]


def _price(sc: Scenario, strategy: Strategy) -> PriceResult:
    if strategy is Strategy.VTS:
        return vts_price(sc.portfolio, sc.strategy, sc.market, sc.option)
    return mlvts_price(sc.portfolio, sc.strategy, sc.market, sc.option, sc.curve())


def cmd_price(args, stdout: TextIO) -> int:
    strategy = Strategy(args.strategy)
    rows = []
    for sc in _sweep(_scenario(args), args.sweep):
        res = _price(sc, strategy)
        sigma = sc.sigma
        rows.append((strategy, sc.option.kind, sc.portfolio.v, sc.option.strike, sigma,
                     res.price, res.d1, res.d2, res.total_variance))
    if args.sweep is None:
        _, kind, _, _, _, price, d1, d2, var = rows[0]
        print(f"{strategy.value} {kind.value}: price={price!r} d1={d1!r} d2={d2!r} "
              f"total_variance={var!r}", file=stdout)
        if args.out:
            _write_csv(rows, PRICE_HEADER, args.out, stdout)
    else:
        _write_csv(rows, PRICE_HEADER, args.out, stdout)
    return EXIT_OK


def cmd_greeks(args, stdout: TextIO) -> int:
    strategy = Strategy(args.strategy)
    rows = []
    for sc in _sweep(_scenario(args), args.sweep):
        sigma = sc.constant_sigma()
        g = greeks(sc.portfolio, sigma, sc.strategy, sc.market, sc.option, strategy)
        rows.append((strategy, sc.option.kind, sc.portfolio.v, sc.portfolio.s, sc.option.strike,
                     sigma, g.vega, g.delta, g.gamma, g.branch))
    _write_csv(rows, GREEKS_HEADER, args.out, stdout)
    return EXIT_OK


def _sim(sc: Scenario, args, default_steps: Optional[int] = None, **extra):
    steps = args.steps if args.steps is not None or sc.sim is not None else default_steps
    sim = override_sim(sc.sim, n_steps=steps, n_paths=args.paths, seed=args.seed,
                       scheme=args.scheme, **extra)
    if sim is None:
        raise ConfigurationError("scenario is missing required block(s): sim (or pass --steps)")
    return sim


def cmd_simulate(args, stdout: TextIO, stderr: TextIO) -> int:
    sc = _scenario(args)
    sc.require("heston")
    sim = _sim(sc, args)
    strategy = Strategy(args.strategy)
    paths = simulate_portfolio(
        simulate_heston(sc.heston, sim, sc.market), sc.portfolio, sc.strategy, sc.market, sim, strategy
    )

    def rows(i: int):
        p = paths.path(i)
        return zip(*(a.tolist() for a in (p.times, p.asset, p.variance, p.weight, p.bond, p.portfolio)))

    out = args.out
    if out is None:
        if len(paths) > 1:
            raise ConfigurationError("--out DIR is required when simulating more than one path")
        _write_csv(rows(0), PATH_HEADER, None, stdout)
    elif len(paths) == 1 and out.endswith(".csv"):
        _write_csv(rows(0), PATH_HEADER, out, stdout)
    else:
        for i in range(len(paths)):
            _write_csv(rows(i), PATH_HEADER, str(Path(out) / f"path_{i:05d}.csv"), stdout)
    c = paths.counts
    print(f"paths={len(paths)} steps={sim.n_steps} variance_truncations={c.variance_truncations} "
          f"weight_clamps={c.weight_clamps} value_floors={c.value_floors}", file=stderr)
    return EXIT_OK


def cmd_mcprice(args, stdout: TextIO) -> int:
    sc = _scenario(args)
    sc.require("heston")
    sim = _sim(sc, args, measure=Measure.RISK_NEUTRAL)
    strategy = Strategy(args.strategy)
    res = mc_price(sc.heston, sc.portfolio, sc.strategy, sc.market, sc.option, sim, strategy)
    closed = None
    if strategy is Strategy.VTS:
        # exact for any adapted volatility path
        closed = vts_price(sc.portfolio, sc.strategy, sc.market, sc.option).price
    elif sc.heston.constant_variance:
        curve = VolCurve.constant(math.sqrt(sc.heston.theta), sc.market.t0, sc.market.T)
        closed = mlvts_price(sc.portfolio, sc.strategy, sc.market, sc.option, curve).price
    z = (res.estimate - closed) / res.standard_error if closed is not None and res.standard_error > 0 else None
    row = (strategy, sc.option.kind, res.estimate, res.standard_error, closed, z,
           res.discounted_value, res.discounted_value_se, res.n_paths, sim.n_steps, sim.seed)
    _write_csv([row], MC_HEADER, args.out, stdout)
    return EXIT_OK


def cmd_converge(args, stdout: TextIO) -> int:
    sc = _scenario(args)
    sc.require("heston")
    # the ladder, not n_steps, sets the grids
    sim = _sim(sc, args, default_steps=1)
    ladder = ladder_or_default(sc, parse_ladder(args.ladder) if args.ladder else None)
    rep = convergence_study(sc.heston, sc.portfolio, sc.strategy, sc.market, sim, ladder, args.strategy)
    rows = list(zip(rep.step_sizes, rep.strong_errors, rep.standard_errors))
    rows.append(("fitted_order", rep.fitted_order, rep.order_halfwidth))
    _write_csv(rows, CONVERGENCE_HEADER, args.out, stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="JSON scenario file")
    common.add_argument("--strategy", choices=[s.value for s in Strategy], default="vts")
    common.add_argument("--option", choices=[k.value for k in OptionKind], default=None,
                        help="override the scenario's option kind")
    common.add_argument("--out", default=None, help="output CSV file (or directory for simulate)")

    sim_flags = argparse.ArgumentParser(add_help=False)
    sim_flags.add_argument("--scheme", choices=["euler", "milstein"], default=None)
    sim_flags.add_argument("--steps", type=int, default=None)
    sim_flags.add_argument("--paths", type=int, default=None)
    sim_flags.add_argument("--seed", type=int, default=None)

    parser = argparse.ArgumentParser(prog="voltarget", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("price", "closed-form option price"), ("greeks", "Vega, Delta, Gamma")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--sigma", type=float, default=None, help="constant risky volatility")
        p.add_argument("--sweep", default=None, metavar="PARAM:LO:HI:N")
    sub.add_parser("simulate", parents=[common, sim_flags], help="Heston paths of the portfolio")
    sub.add_parser("mcprice", parents=[common, sim_flags], help="risk-neutral Monte Carlo price")
    p = sub.add_parser("converge", parents=[common, sim_flags], help="strong convergence order")
    p.add_argument("--ladder", default=None, metavar="D1,D2,...", help="nested step sizes in years")
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.command == "price":
            return cmd_price(args, stdout)
        if args.command == "greeks":
            return cmd_greeks(args, stdout)
        if args.command == "simulate":
            return cmd_simulate(args, stdout, stderr)
        if args.command == "mcprice":
            return cmd_mcprice(args, stdout)
        return cmd_converge(args, stdout)
    except (ConfigurationError, ValidationError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (DomainError, NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
