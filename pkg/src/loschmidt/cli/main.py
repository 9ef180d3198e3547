"""``loschmidt`` command: run, diagnose, plot, info.

Exit codes: 0 success, 1 configuration error, 2 computation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

from loschmidt import __version__
from loschmidt.cli import config as cfgmod
from loschmidt.cli.plotting import PlotError, emit_plot
from loschmidt.cli.runner import DIAGNOSTIC_KINDS, ComputeError, run_diagnostic, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value file")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS) + ["custom"])
    p.add_argument("--out", metavar="DIR", help=f"output directory (else ${cfgmod.OUT_ENV}, else ./runs)")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="Monte Carlo samples; switches IVR to monte-carlo sampling")
    p.add_argument("--workers", type=int, default=None, help="threads (default: CPU count)")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loschmidt", description="Fidelity decay of the perturbed kicked rotor")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="compute fidelity curves")
    _common(run)
    diag = sub.add_parser("diagnose", help="classical action diagnostics")
    diag.add_argument("kind", choices=DIAGNOSTIC_KINDS)
    _common(diag)
    plot = sub.add_parser("plot", help="write a matplotlib script for a CSV")
    plot.add_argument("csv")
    plot.add_argument("--style", choices=("log", "linear"), default="log")
    plot.add_argument("--output", metavar="PATH")
    info = sub.add_parser("info", help="show presets")
    info.add_argument("preset", nargs="?")
    return ap


def config_from_args(args) -> cfgmod.ExperimentConfig:
    overrides: dict = {}
    if args.config:
        overrides.update(cfgmod.load_config_file(args.config))
    for item in args.sets:
        if "=" not in item:
            raise cfgmod.ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = value
    if args.out:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.samples is not None:
        overrides["samples"] = args.samples
        overrides.setdefault("sampling", "monte-carlo")
    overrides["workers"] = args.workers if args.workers is not None else (os.cpu_count() or 1)
    return cfgmod.build_config(args.preset, overrides)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "info":
            names = [args.preset] if args.preset else sorted(cfgmod.PRESETS)
            for name in names:
                if name not in cfgmod.PRESETS:
                    raise cfgmod.ConfigError("preset", f"unknown preset {name!r}")
                print(name, json.dumps(cfgmod.PRESETS[name]))
            return EXIT_OK
        if args.command == "plot":
            path = emit_plot(args.csv, style=args.style, out_path=args.output)
            print(path)
            return EXIT_OK
        cfg = config_from_args(args)
        if args.command == "run":
            manifest = run_experiment(cfg)
        else:
            manifest = run_diagnostic(args.kind, cfg)
        out = cfg.resolved_out_dir()
        for name in manifest.files:
            print(out / name)
        return EXIT_OK
    except (cfgmod.ConfigError, PlotError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputeError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
