"""Command-line interface: run, verify-manifest, plot, list-scenarios."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SCENARIO_KINDS, ConfigError, parse_config
from .runner import run_scenario, verify_manifest

_SCENARIO_HELP = {
    "free_kg": "evolve the free K-G equation and verify continuity/action residuals",
    "charged_kg": "evolve the minimally-coupled K-G equation under an EM potential",
    "schrodinger": "evolve the nonrelativistic reference and verify Madelung residuals",
    "classical_limit_sweep": "sweep c and fit the K-G -> Schrodinger convergence slope",
    "vortex": "seed a phase vortex; winding map, circulation quanta, curl check",
    "convergence": "refine the snapshot spacing and report observed residual orders",
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kghydro",
        description="Klein-Gordon / Schrodinger hydrodynamic verification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a JSON config")
    p_run.add_argument("--config", required=True, type=Path, help="scenario JSON")
    p_run.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides output.directory in the config)")

    p_verify = sub.add_parser("verify-manifest", help="check manifest file index integrity")
    p_verify.add_argument("manifest", type=Path)

    p_plot = sub.add_parser("plot", help="render SVG plots for a completed run")
    p_plot.add_argument("manifest", type=Path)

    sub.add_parser("list-scenarios", help="list scenario kinds")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for kind in SCENARIO_KINDS:
            print(f"{kind:22s} {_SCENARIO_HELP[kind]}")
        return EXIT_OK

    if args.command == "run":
        try:
            config = parse_config(args.config)
        except ConfigError as exc:
            for problem in exc.problems:
                print(f"config error: {problem}", file=sys.stderr)
            return EXIT_CONFIG
        out_dir = args.out or config.output_dir
        if out_dir is None:
            print("config error: no output directory (--out or output.directory)",
                  file=sys.stderr)
            return EXIT_CONFIG
        result = run_scenario(config, out_dir)
        print(f"manifest: {result.manifest_path}")
        if not result.ok:
            print(f"run ended with status: {result.exit_status}", file=sys.stderr)
            return EXIT_INSTABILITY
        return EXIT_OK

    if args.command == "verify-manifest":
        problems = verify_manifest(args.manifest)
        if problems:
            for problem in problems:
                print(problem, file=sys.stderr)
            return EXIT_ERROR
        print("manifest ok")
        return EXIT_OK

    if args.command == "plot":
        from .plots import emit_plots

        made = emit_plots(args.manifest)
        for p in made:
            print(p)
        return EXIT_OK

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
