"""
margin-paths command line

    margin-paths <experiment> [--config FILE] [--seed N] [--out DIR]
                              [--rho-max X] [--restarts R] [--grid-res E]

Exit status: 0 all gating checks pass, 1 a gating check failed, 2 parse or
configuration error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables FIRST (before reading process settings)
load_dotenv()

from pythonjsonlogger import jsonlogger  # noqa: E402

from margin_paths import __version__  # noqa: E402
from margin_paths.config import (  # noqa: E402
    EXPERIMENTS,
    Config,
    apply_overrides,
    get_config,
    load_experiment_config,
)
from margin_paths.errors import ConfigError  # noqa: E402
from margin_paths.harness import EXIT_CONFIG, run  # noqa: E402

logger = logging.getLogger("marginpaths.cli")

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="margin-paths",
        description="Compute and cross-check constrained, margin, regularization and optimization paths.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help="Experiment to run")
    parser.add_argument("--config", type=Path, default=None, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="Run seed")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--rho-max", type=float, default=None, help="Largest ρ on the grid")
    parser.add_argument("--restarts", type=int, default=None, help="Multistart count")
    parser.add_argument("--grid-res", type=float, default=None, help="Grid-oracle resolution")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser.parse_args(argv)


def setup_logging(settings: Config):
    """Configure the root handler once, text or JSON per LOG_FORMAT"""
    handler = logging.StreamHandler()
    if settings.LOG_FORMAT == "json":
        handler.setFormatter(jsonlogger.JsonFormatter(TEXT_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(settings.LOG_LEVEL)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        settings = get_config()
    except ValueError as e:
        print(f"margin-paths: invalid environment: {e}", file=sys.stderr)
        return EXIT_CONFIG
    setup_logging(settings)

    try:
        config = load_experiment_config(args.config, args.experiment)
        config = apply_overrides(
            config,
            seed=args.seed,
            out=args.out,
            rho_max=args.rho_max,
            restarts=args.restarts,
            grid_res=args.grid_res,
        )
    except ConfigError as e:
        print(f"margin-paths: {e}", file=sys.stderr)
        for line in e.diagnostics:
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG

    return run(config, settings)


if __name__ == "__main__":
    sys.exit(main())
