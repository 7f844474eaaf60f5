"""Command line interface: simulate, optimize, fit-winch-law, loyd."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import KiteCycleError
from .harness import run_simulation, write_telemetry_csv
from .optimizer import (
    cycle_summary,
    fit_winch_law,
    loyd_limit,
    optimize_cycle,
    read_cycle_columns,
    write_cycle_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kitecycle",
        description="Pumping-cycle kite power: closed-loop simulation and cycle optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the closed-loop simulation")
    sim.add_argument("config", type=Path)
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.add_argument("--dt", type=float, help="override sample time [s]")
    sim.add_argument("--duration", type=float, help="override duration [s]")
    sim.add_argument("--seed", type=int, help="override measurement-noise seed")

    opt = sub.add_parser("optimize", help="optimize a reduced pumping cycle")
    opt.add_argument("config", type=Path)
    opt.add_argument("--out", type=Path, required=True)
    opt.add_argument("--nodes", type=int, default=40)
    opt.add_argument("--substeps", type=int, default=8)
    opt.add_argument("--max-iterations", type=int, default=250)

    fit = sub.add_parser("fit-winch-law", help="fit the winch law from a cycle or telemetry CSV")
    fit.add_argument("csv", type=Path)
    fit.add_argument("--wind-speed", type=float, required=True, help="wind speed for normalization [m/s]")

    loyd = sub.add_parser("loyd", help="print the Loyd crosswind power limit")
    loyd.add_argument("config", type=Path)
    return parser


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.dt is not None:
        cfg = dataclasses.replace(cfg, dt=args.dt)
    if args.duration is not None:
        cfg = dataclasses.replace(cfg, duration=args.duration)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, noise=dataclasses.replace(cfg.noise, seed=args.seed))

    args.out.mkdir(parents=True, exist_ok=True)
    telemetry = args.out / "telemetry.csv"
    result = run_simulation(cfg, telemetry_path=telemetry)
    reports = [r.as_dict() for r in result.reports]
    (args.out / "cycle_reports.json").write_text(json.dumps(reports, indent=2) + "\n")
    if result.aborted:
        print(f"simulation aborted: {result.abort_reason}", file=sys.stderr)
        print(f"partial telemetry in {telemetry}", file=sys.stderr)
        return 2
    print(f"telemetry: {telemetry} ({len(result.records)} samples)")
    print(f"cycle reports: {args.out / 'cycle_reports.json'} ({len(reports)} complete cycles)")
    for rep in result.reports:
        print(
            f"  cycle {rep.cycle_index}: T={rep.T:.1f} s  W_out={rep.W_out / 1e3:.1f} kJ  "
            f"W_in={rep.W_in / 1e3:.1f} kJ  P_bar={rep.P_bar_cycle / 1e3:.2f} kW"
        )
    return 0


def _cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    cycle = optimize_cycle(
        cfg.optimizer,
        cfg.wind,
        cfg.params,
        n_nodes=args.nodes,
        substeps=args.substeps,
        max_iterations=args.max_iterations,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_cycle_csv(cycle, args.out / "cycle.csv")
    summary = cycle_summary(cycle)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"P_bar = {cycle.p_bar:.1f} W  ({cycle.ratio:.3f} of Loyd limit)")
    print(f"cycle: {args.out / 'cycle.csv'}  summary: {args.out / 'summary.json'}")
    if not cycle.converged:
        print(f"warning: optimizer did not converge ({cycle.message})", file=sys.stderr)
        return 3
    return 0


def _cmd_fit(args) -> int:
    cols = read_cycle_columns(args.csv)
    if "theta" not in cols:
        raise KiteCycleError(f"{args.csv}: no 'theta' column")
    if "l_dot" in cols:
        l_dot = cols["l_dot"]
    elif "v_winch_actual" in cols:
        l_dot = cols["v_winch_actual"]
    else:
        raise KiteCycleError(f"{args.csv}: need an 'l_dot' or 'v_winch_actual' column")
    fit = fit_winch_law(np.asarray(cols["theta"], float), np.asarray(l_dot, float), args.wind_speed)
    print(
        json.dumps(
            {
                "theta0": fit.theta0,
                "slope": fit.slope,
                "slope_lower": fit.slope_lower,
                "slope_upper": fit.slope_upper,
                "n_samples": fit.n_samples,
            },
            indent=2,
        )
    )
    return 0


def _cmd_loyd(args) -> int:
    cfg = load_config(args.config)
    print(f"{loyd_limit(cfg.wind, cfg.params):.10g} W")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "optimize": _cmd_optimize,
        "fit-winch-law": _cmd_fit,
        "loyd": _cmd_loyd,
    }
    try:
        return handlers[args.command](args)
    except KiteCycleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
