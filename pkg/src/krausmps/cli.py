"""Command-line interface.

Subcommands:
  simulate    run one experiment from a JSON config
  sweep-fig2  random-two-qubit-state angle-grid sweep to CSV
  converge    bond-dimension convergence ladder
  scaling     chi_eff/L vs 1/L report over a list of rates
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, oracle, runner


def _add_simulate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("simulate", help="run one experiment from a JSON config")
    p.add_argument("--config", required=True, help="path to the experiment JSON")
    p.add_argument("--engine", choices=runner.ENGINES, default=None,
                   help="override the engine in the config")
    p.add_argument("--dump-circuit", default=None, metavar="PLAN_JSON",
                   help="also write the circuit plan to this path")
    p.add_argument("--out", default=None, help="output directory override")


def _add_sweep(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sweep-fig2",
                       help="angle-grid sweep over random two-qubit states")
    p.add_argument("--channel", required=True,
                   help="channel label (ad, pf, amplitude_damping, phase_flip)")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default="sweep.csv", help="output CSV path")


def _add_converge(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("converge", help="bond-dimension convergence ladder")
    p.add_argument("--config", required=True)
    p.add_argument("--chis", required=True,
                   help="comma-separated increasing chi values, e.g. 32,64,128")
    p.add_argument("--out", default="ladder.csv", help="output CSV path")


def _add_scaling(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("scaling", help="chi_eff/L vs 1/L over noise rates")
    p.add_argument("--config", required=True)
    p.add_argument("--rates", required=True, help="comma-separated rates")
    p.add_argument("--depths", default=None,
                   help="comma-separated layer depths (default: all)")
    p.add_argument("--out", default="scaling.csv", help="output CSV path")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="krausmps",
        description="Noisy brickwork circuits: MPS trajectories, adaptive "
                    "Kraus unravelings, and MPDO simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_sweep(sub)
    _add_converge(sub)
    _add_scaling(sub)
    args = parser.parse_args(argv)

    if args.command == "simulate":
        config = runner.ExperimentConfig.from_json(args.config)
        if args.engine:
            config.engine = args.engine
        if args.out:
            config.out_dir = args.out
        manifest = runner.run(config, dump_circuit=args.dump_circuit)
        print(f"wrote {len(manifest.outputs)} output file(s) in "
              f"{manifest.wall_time_s:.1f}s:")
        for name, path in manifest.outputs.items():
            print(f"  {name}: {path}")
        print(f"  manifest: {Path(config.out_dir or 'runs') / 'manifest.json'}")
        return 0

    if args.command == "sweep-fig2":
        table = oracle.angle_grid_sweep(args.channel, args.rate, args.samples,
                                        seed=args.seed)
        oracle.write_sweep_csv(args.out, table)
        print(f"wrote {len(table.rows)} grid rows to {args.out}")
        return 0

    if args.command == "converge":
        config = runner.ExperimentConfig.from_json(args.config)
        config.chi_ladder = [int(c) for c in args.chis.split(",")]
        entries = runner.convergence_ladder(config)
        runner.write_ladder_csv(args.out, entries)
        for e in entries:
            print(f"chi {e.chi_pair[0]} -> {e.chi_pair[1]}: converged through "
                  f"layer {e.converged_depth}/{config.layers}")
        return 0

    if args.command == "scaling":
        config = runner.ExperimentConfig.from_json(args.config)
        rates = [float(r) for r in args.rates.split(",")]
        depths = ([int(d) for d in args.depths.split(",")]
                  if args.depths else None)
        rows = runner.scaling_report(config, rates, depths)
        runner.write_scaling_csv(args.out, rows)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
