"""
IASim - Commands
CLI subcommand handlers; each command handles one experiment only
"""
import argparse
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, List

from core.beamspace import OptionTag, Phase

from .config import ExperimentConfig, app_config
from .models import RunManifest
from .repositories import RepositoryFactory
from .services import ServiceFactory

logger = logging.getLogger("iasim.commands")

ALL_OPTIONS = [tag.value for tag in OptionTag]
DEFAULT_PERCENTILES = ["1%", "5%", "high"]
DEFAULT_PHI_GRID = [0.01, 0.02, 0.05, 0.1, 0.2]


@dataclass
class CommandContext:
    args: argparse.Namespace
    config: ExperimentConfig
    services: ServiceFactory
    out_dir: Path


@dataclass
class Command:
    name: str
    help: str
    configure: Callable[[argparse.ArgumentParser], None]
    handler: Callable[[CommandContext], List[Path]]


def _tsig_seconds(ctx: CommandContext) -> List[float]:
    return [t * 1e-6 for t in ctx.args.tsig_us]


# =====================================================
# SNR DISTRIBUTION
# =====================================================

def _configure_snr(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-ues", type=int, default=None, help="UE drops (default from config)")


def handle_snr_dist(ctx: CommandContext) -> List[Path]:
    report = ctx.services.get_snr_service().run_snr_distribution(ctx.args.n_ues)
    return [
        RepositoryFactory.get_snr_repo(ctx.out_dir).save(report),
        RepositoryFactory.get_snr_cdf_repo(ctx.out_dir).save(report),
    ]


# =====================================================
# CALIBRATION
# =====================================================

def _configure_k(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, nargs="+", default=[1], help="scan cycles")


def handle_calibrate(ctx: CommandContext) -> List[Path]:
    service = ctx.services.get_calibration_service()
    records = []
    for option in ctx.args.option:
        for phase in ctx.args.phase:
            for t_sig in _tsig_seconds(ctx):
                records.extend(service.calibrate(option, phase, t_sig, ctx.args.k))
    return [RepositoryFactory.get_threshold_table_repo(ctx.out_dir).save(records)]


# =====================================================
# MISDETECTION
# =====================================================

def _configure_operating_points(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--snr-db", type=float, nargs="+", help="omni SNR points in dB")
    group.add_argument("--percentile", nargs="+", help="SNR percentile tags, e.g. 1%% 5%% high")


def _configure_pmd(parser: argparse.ArgumentParser) -> None:
    _configure_operating_points(parser)
    _configure_k(parser)


def _operating_points(ctx: CommandContext, phase: str):
    """(percentile tag or None, snr_db) pairs for a phase."""
    if ctx.args.snr_db:
        return [(None, snr) for snr in ctx.args.snr_db]
    snr_service = ctx.services.get_snr_service()
    tags = ctx.args.percentile or DEFAULT_PERCENTILES
    return [(tag, snr_service.operating_point(tag, phase).snr_db) for tag in tags]


def handle_pmd(ctx: CommandContext) -> List[Path]:
    service = ctx.services.get_pmd_service()
    points = []
    for option in ctx.args.option:
        for phase in ctx.args.phase:
            for t_sig in _tsig_seconds(ctx):
                for _, snr_db in _operating_points(ctx, phase):
                    points.extend(service.run_pmd(option, phase, snr_db, t_sig, ctx.args.k))
    return [RepositoryFactory.get_pmd_repo(ctx.out_dir).save(points)]


def handle_min_cycles(ctx: CommandContext) -> List[Path]:
    service = ctx.services.get_pmd_service()
    results = []
    for option in ctx.args.option:
        for phase in ctx.args.phase:
            for t_sig in _tsig_seconds(ctx):
                for tag, snr_db in _operating_points(ctx, phase):
                    results.append(service.min_cycles(option, phase, snr_db, t_sig, percentile=tag))
    return [RepositoryFactory.get_min_cycles_repo(ctx.out_dir).save(results)]


# =====================================================
# DELAYS AND BOUNDS
# =====================================================

def _configure_delay(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--percentile", nargs="+", default=DEFAULT_PERCENTILES)
    parser.add_argument("--phi", type=float, nargs="+", default=DEFAULT_PHI_GRID, help="overhead grid")


def handle_delay_curve(ctx: CommandContext) -> List[Path]:
    service = ctx.services.get_delay_service()
    curves = [
        service.run_delay_curve(option, phase, tag, t_sig, ctx.args.phi)
        for option in ctx.args.option
        for phase in ctx.args.phase
        for t_sig in _tsig_seconds(ctx)
        for tag in ctx.args.percentile
    ]
    return [RepositoryFactory.get_delay_repo(ctx.out_dir).save(curves)]


def _configure_bounds(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--percentile", default="1%", help="SNR percentile defining gamma_tgt")
    parser.add_argument("--phi", type=float, nargs="+", default=DEFAULT_PHI_GRID, help="overhead grid")
    parser.add_argument("--gamma-sig-db", type=float, default=None,
                        help="accumulated detection SNR; estimated from the first option when omitted")


def handle_bounds(ctx: CommandContext) -> List[Path]:
    service = ctx.services.get_bounds_service()
    if ctx.args.gamma_sig_db is not None:
        gamma_sig = 10.0 ** (ctx.args.gamma_sig_db / 10.0)
    else:
        gamma_sig = service.estimate_gamma_sig(ctx.args.option[0], ctx.args.percentile, _tsig_seconds(ctx)[0])
    points = service.sweep(ctx.args.option, ctx.args.phi, ctx.args.percentile, gamma_sig)
    return [RepositoryFactory.get_bounds_repo(ctx.out_dir).save(points)]


all_commands = [
    Command("snr-dist", "omni SNR distribution of dropped UEs", _configure_snr, handle_snr_dist),
    Command("calibrate", "calibrate detection thresholds", _configure_k, handle_calibrate),
    Command("pmd", "misdetection probability versus scan cycles", _configure_pmd, handle_pmd),
    Command("min-cycles", "minimum scan cycles meeting the misdetection target",
            _configure_operating_points, handle_min_cycles),
    Command("delay-curve", "detection delay versus overhead", _configure_delay, handle_delay_curve),
    Command("bounds", "synchronization delay lower bounds", _configure_bounds, handle_bounds),
]


def write_manifest(ctx: CommandContext, files: List[Path]) -> Path:
    manifest = RunManifest(
        command=ctx.args.command,
        seed=ctx.config.seed,
        version=app_config.version,
        created_at=datetime.utcnow().isoformat(),
        high_snr_definition=f"high = {ctx.config.monte_carlo.high_snr_percentile:g}th DL/UL percentile",
        files=[f.name for f in files],
        config=ctx.config.model_dump(mode="json"),
    )
    return RepositoryFactory.get_manifest_repo(ctx.out_dir).save(manifest)


def common_arguments() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per point")
    common.add_argument("--option", nargs="+", default=ALL_OPTIONS, choices=ALL_OPTIONS)
    common.add_argument("--phase", nargs="+", default=[Phase.SYNC.value], choices=[p.value for p in Phase])
    common.add_argument("--tsig-us", type=float, nargs="+", default=[10.0], help="signal duration in us")
    common.add_argument("--channel", choices=["ideal", "cluster"], default=None)
    common.add_argument("--log-level", default=None, help="overrides IASIM_LOG_LEVEL")
    return common
