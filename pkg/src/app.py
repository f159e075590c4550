"""Command-line interface for the attitude density propagator."""

import argparse
import json
import logging
import sys
from typing import Dict, List, Optional

from src import __version__
from src.config.settings import RunConfig, load_run_config
from src.core.exceptions import ConfigurationError, PropagatorError, ValidationError
from src.core.models import Measurement
from src.orchestration import pipeline_orchestrator
from src.utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

COMMANDS = ("propagate", "estimate", "trajectory", "transform", "marginal")
EXIT_CONFIGURATION = 2
EXIT_FAILURE = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="so3prop",
        description="Propagate attitude densities of the 3D pendulum on SO(3) x R^3 and update them "
                    "with attitude measurements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Configuration file of 'dotted.key = value' lines")
    common.add_argument("--workers", type=int, help="Worker threads (output does not depend on it)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--no-color", action="store_true", help="Plain log output without ANSI colours")

    sub = parser.add_subparsers(dest="command", required=True)
    propagate = sub.add_parser("propagate", parents=[common], help="Propagate the initial density to snapshot times")
    propagate.add_argument("--snapshot-times", help="Comma-separated snapshot times in seconds")
    estimate = sub.add_parser("estimate", parents=[common], help="Propagate with Bayes updates at measurements")
    given = estimate.add_mutually_exclusive_group()
    given.add_argument("--measurements", help="CSV with columns k, z1..z6 (simulated when neither option is given)")
    given.add_argument("--measurement", action="append", metavar="K,Z1,...,Z6",
                       help="One measurement at step K: direction z1..z3 and angular velocity z4..z6; repeatable")
    sub.add_parser("trajectory", parents=[common], help="Integrate one trajectory with energy diagnostics")
    transform = sub.add_parser("transform", parents=[common], help="Attitude spectra of a stored density")
    transform.add_argument("--density", required=True, help="Density file written by 'propagate'")
    marginal = sub.add_parser("marginal", parents=[common], help="Sphere marginals of a stored density")
    marginal.add_argument("--density", required=True, help="Density file written by 'propagate'")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Optional[str]]:
    """CLI flags as dotted-key overrides (applied after file and environment)."""
    return {
        "run.workers": None if args.workers is None else str(args.workers),
        "output.dir": args.out,
        "run.snapshot_times": getattr(args, "snapshot_times", None),
    }


def parse_measurement(text: str) -> Measurement:
    """Measurement from a "K,Z1,...,Z6" command-line value.

    Raises:
        ConfigurationError: If the value does not hold an integer step and six numbers.
    """
    parts = [part.strip() for part in text.split(",")]
    try:
        if len(parts) != 7:
            raise ValueError(f"expected 7 comma-separated values, got {len(parts)}")
        return Measurement(z=[float(part) for part in parts[1:]], k=int(parts[0]), label="cli")
    except (ValueError, ValidationError) as e:
        raise ConfigurationError("--measurement", f"{text!r}: {e}") from e


def error_payload(error: Exception) -> Dict[str, Optional[str]]:
    return {
        "error": type(error).__name__,
        "message": str(error),
        "field": getattr(error, "field", None),
    }


def run_command(args: argparse.Namespace, config: RunConfig) -> pipeline_orchestrator.RunSummary:
    if args.command == "propagate":
        return pipeline_orchestrator.cmd_propagate(config)
    if args.command == "estimate":
        inline = [parse_measurement(text) for text in args.measurement or []]
        return pipeline_orchestrator.cmd_estimate(config, args.measurements, inline or None)
    if args.command == "trajectory":
        return pipeline_orchestrator.cmd_trajectory(config)
    if args.command == "transform":
        return pipeline_orchestrator.cmd_transform(config, args.density)
    return pipeline_orchestrator.cmd_marginal(config, args.density)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=getattr(logging, args.log_level), use_enhanced_formatter=not args.no_color,
                  color_enabled=not args.no_color)

    try:
        config = load_run_config(args.config, overrides_from_args(args))
        summary = run_command(args, config)
    except ConfigurationError as e:
        logger.error(f"❌ Configuration error: {e}")
        print(json.dumps(error_payload(e)), file=sys.stderr)
        return EXIT_CONFIGURATION
    except (PropagatorError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(json.dumps(error_payload(e)), file=sys.stderr)
        return EXIT_FAILURE

    logger.info(f"✅ {args.command} wrote {len(summary.files)} file(s) to {summary.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
