"""Command-line entry point.

    flowbandits run      --config exp.toml --out results/ [--workers N] [--set key=value ...]
    flowbandits sweep    --config exp.toml --out results/ [--axis pages|alpha2] [--values 2,3,4]
    flowbandits validate --config exp.toml [--set key=value ...]

Exit status: 0 on success, 2 for configuration errors, 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import parse_config_and_sweep, parse_value
from .harness import ConfigError, run_experiment, sweep, sweep_configs
from .kernels import BACKEND
from .output import emit_outputs, emit_sweep

log = logging.getLogger("flowbandits")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowbandits", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (omit for all defaults)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable; dotted keys reach into sections")
    common.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", parents=[common], help="run one experiment")
    sw = sub.add_parser("sweep", parents=[common], help="run one experiment per sweep value")
    for p in (run, sw):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="parallel runs (default: config value)")
    sw.add_argument("--axis", choices=("pages", "alpha2"), help="sweep axis (default: [sweep] axis)")
    sw.add_argument("--values", help="comma-separated sweep values (default: [sweep] values or the standard grid)")
    sub.add_parser("validate", parents=[common], help="check a config without running anything")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, sweep_section = parse_config_and_sweep(args.config, args.overrides)
        if args.command == "validate":
            print(f"ok: {cfg.pages} pages {list(cfg.candidates)}, context {cfg.context}, "
                  f"{cfg.runs} runs x {cfg.steps} steps, agents {', '.join(map(str, cfg.agents))}")
            return 0
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError("--workers", "must be positive")
        if args.command == "sweep":
            axis = args.axis or sweep_section.get("axis")
            if axis is None:
                raise ConfigError("sweep.axis", "no sweep axis given")
            values = sweep_section.get("values")
            if args.values is not None:
                values = [parse_value(v) for v in args.values.split(",") if v.strip()]
            sweep_configs(cfg, axis, values)  # validate every grid point before running
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        start = time.perf_counter()
        log.info("kernel backend: %s", BACKEND)
        if args.command == "run":
            series = run_experiment(cfg, workers)
            paths = emit_outputs(series, args.out)
            for agent in series.agents:
                m, e = series.final(agent)
                print(f"{agent:22s} final cumulative regret {m:.4f} +/- {e:.4f}")
        else:
            result = sweep(cfg, axis, values, workers)
            paths = [emit_sweep(result, args.out)]
            for agent in result.agents:
                cells = ", ".join(f"{v}: {m:.4f}" for v, m in zip(result.values, result.final_mean[agent]))
                print(f"{agent:22s} {cells}")
        log.info("wrote %s in %.1fs", ", ".join(map(str, paths[:3])), time.perf_counter() - start)
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
