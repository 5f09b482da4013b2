#!/usr/bin/env python3
"""Orchestrator for the heteroclinic-profile pipeline: check | bounds | iterate | verify."""

import argparse
import sys
import time
from pathlib import Path

from nicholson import ConfigError, generate_run_id, setup_logging
from nicholson.cli import COMMANDS, EXIT_CONFIG, build_run_config


def _parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Monotone heteroclinic profiles for Nicholson's blowflies with harvesting"
    )
    parser.add_argument("command", choices=list(COMMANDS),
                        help="check hypotheses, emit bound curves, run the iteration, or verify")
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML config (default: config.yaml)")
    parser.add_argument("--out", type=Path, default=None,
                        help="Output directory (default: output.dir or data/results)")
    parser.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="Override one config value; repeatable")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    run_id = generate_run_id()
    logger = setup_logging(run_id)

    try:
        cfg = build_run_config(args.config, args.sets, args.out)
    except ConfigError as e:
        logger.error("%s", e)
        print(f"CONFIG ERROR: {e}")
        return EXIT_CONFIG

    logger.info("=" * 60)
    logger.info("%s  (run %s, output %s)", args.command, run_id, cfg.out_dir)
    logger.info("=" * 60)

    start = time.time()
    code = COMMANDS[args.command](cfg)
    _print_summary(args.command, code, start)
    return code


def _print_summary(command: str, code: int, start_time: float) -> None:
    elapsed = time.time() - start_time
    print("\n" + "=" * 60)
    print(f"{command.upper()} {'OK' if code == 0 else 'FAILED'} (exit {code})")
    print(f"Elapsed time:         {elapsed:.2f}s")
    print("=" * 60)


if __name__ == "__main__":
    sys.exit(main())
