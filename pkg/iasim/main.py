"""
IASim - Directional Initial-Access Simulator
Monte Carlo detection, delay and bound experiments for beam-swept access

Layering:
- core/     - numerical engines (beamspace, channel, detector, ...)
- workers/  - trial chunks and the process-pool runner
- iasim/    - configuration, services and result files (this package)

Project Structure:
├── config.py       - Experiment config and process settings
├── models.py       - Pydantic result schemas
├── repositories.py - Result files and threshold cache
├── services.py     - Experiment drivers
├── commands.py     - CLI subcommands (controllers)
└── main.py         - Application entry point (this file)
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .commands import CommandContext, all_commands, common_arguments, write_manifest
from .config import ExperimentConfig, app_config, runner_settings
from .repositories import ResultsIOError, ThresholdCacheRepository
from .services import MissingCalibrationError, ServiceFactory, UnachievableTargetError

logger = logging.getLogger("iasim")


def create_parser() -> argparse.ArgumentParser:
    """Parser factory - registers every subcommand with the shared flags"""
    parser = argparse.ArgumentParser(prog="iasim", description=app_config.description)
    parser.add_argument("--version", action="version", version=f"{app_config.title} {app_config.version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = common_arguments()
    for command in all_commands:
        sub = subparsers.add_parser(command.name, help=command.help, parents=[common])
        command.configure(sub)
        sub.set_defaults(handler=command.handler)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, trials=args.trials, channel=args.channel)


def run(argv: Optional[List[str]] = None, cache: Optional[ThresholdCacheRepository] = None) -> int:
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or runner_settings.log_level).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        config = load_config(args)
        ctx = CommandContext(args=args, config=config,
                             services=ServiceFactory(config, cache=cache), out_dir=args.out)
        files = args.handler(ctx)
        files.append(write_manifest(ctx, files))
    except (ValidationError, ValueError) as e:
        print(f"iasim {args.command}: invalid input: {e}", file=sys.stderr)
        return 2
    except (ResultsIOError, OSError, MissingCalibrationError, UnachievableTargetError) as e:
        print(f"iasim {args.command}: {e}", file=sys.stderr)
        return 1
    logger.info(f"{args.command} finished: {', '.join(str(f) for f in files)}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
