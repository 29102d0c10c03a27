"""
IASim - Service Layer
Experiment drivers: SNR distribution, calibration, misdetection, delays and bounds
"""
import logging
import math
from abc import ABC
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from core.beamspace import DesignOption, OptionTag, Phase, RxArch, ScanSchedule, scan_schedule
from core.calibration import (
    DetectorShape,
    HypothesisBudget,
    ThresholdFit,
    calibrate_threshold,
    chunk_size_for,
    hypothesis_budget,
    round_trip_offset,
)
from core.channel import LinkDirection, db_to_linear, drop_distances, gamma0_db_samples, linear_to_db, los_probability
from core.delay_analysis import BoundArch, DelayBoundParams, detection_delay, sync_delay_bound
from core.quantization import effective_snr, quantizer_sigma
from core.seeding import chunk_sizes, point_id
from core.waveform import degrees_of_freedom
from workers.trial_runner import DetectionTask, TrialRunner

from .config import ExperimentConfig, runner_settings
from .models import (
    BoundPoint,
    DelayCurve,
    DelayPoint,
    MinCyclesResult,
    OperatingPoint,
    PmdPoint,
    SnrDistribution,
    SnrReport,
    ThresholdRecord,
)
from .repositories import RepositoryFactory, ThresholdCacheRepository

logger = logging.getLogger("iasim.services")

OptionLike = Union[str, OptionTag, DesignOption]


class MissingCalibrationError(LookupError):
    """No cached threshold for a detector shape and cache-only mode was requested."""


class UnachievableTargetError(RuntimeError):
    """The misdetection target is not reached within the cycle cap."""


def nearest_rank(sorted_values: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile of ascending values."""
    n = len(sorted_values)
    rank = max(1, math.ceil(percentile / 100.0 * n))
    return float(sorted_values[min(rank, n) - 1])


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; non-degenerate at 0 and n."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    margin = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - margin), min(1.0, center + margin)


def link_direction(phase: Phase) -> LinkDirection:
    return LinkDirection.DL if Phase(phase) == Phase.SYNC else LinkDirection.UL


class BaseService(ABC):
    """Abstract base service"""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def _option(self, option: OptionLike) -> DesignOption:
        if isinstance(option, DesignOption):
            return option
        return DesignOption.from_tag(option, self.config.arrays.hybrid_chains)

    def _schedule(self, option: DesignOption, phase: Phase) -> ScanSchedule:
        return scan_schedule(option, phase, self.config.arrays.bs(), self.config.arrays.ue())


class SnrDistributionService(BaseService):
    """Omni SNR of randomly dropped UEs"""

    def __init__(self, config: ExperimentConfig):
        super().__init__(config)
        self._reference: Optional[SnrReport] = None

    def run_snr_distribution(self, n_ues: Optional[int] = None, seed: Optional[int] = None) -> SnrReport:
        """DL and UL SNR on identical drops, LOS states and shadowing."""
        n = n_ues if n_ues is not None else self.config.monte_carlo.n_ues
        if n < 1000:
            raise ValueError(f"n_ues must be >= 1000, got {n}")
        seed = self.config.seed if seed is None else seed
        cell = self.config.cell
        rng = np.random.default_rng(np.random.SeedSequence([seed, point_id("snr", n) & 0xFFFFFFFF]))

        distances = drop_distances(n, cell.radius_m, cell.min_distance_m, rng)
        los = rng.random(n) < los_probability(distances, cell.los_decay_m)
        shadowing_z = rng.standard_normal(n)

        model, radio = cell.pathloss_model(), cell.radio()
        distributions = []
        for direction in (LinkDirection.DL, LinkDirection.UL):
            samples = np.sort(gamma0_db_samples(distances, los, shadowing_z, direction, radio, model))
            percentiles = {f"{p:g}%": nearest_rank(samples, p)
                           for p in (1, 5, 50, self.config.monte_carlo.high_snr_percentile)}
            distributions.append(SnrDistribution(direction=direction.value, samples_db=samples.tolist(),
                                                 percentiles_db=percentiles))
            logger.info(f"{direction.value} SNR percentiles: {percentiles}")
        return SnrReport(dl=distributions[0], ul=distributions[1])

    def percentile_value(self, tag: str) -> float:
        if tag == "high":
            return self.config.monte_carlo.high_snr_percentile
        value = float(tag.rstrip("%"))
        if not 0 < value < 100:
            raise ValueError(f"percentile must be in (0, 100), got {tag}")
        return value

    def operating_point(self, tag: str, phase: Phase) -> OperatingPoint:
        """Omni SNR at a percentile of the reference distribution."""
        if self._reference is None:
            self._reference = self.run_snr_distribution(seed=self.config.monte_carlo.snr_reference_seed)
        percentile = self.percentile_value(tag)
        dist = self._reference.dl if link_direction(phase) == LinkDirection.DL else self._reference.ul
        return OperatingPoint(tag=tag, phase=Phase(phase).value, percentile=percentile,
                              snr_db=nearest_rank(dist.samples_db, percentile))


class CalibrationService(BaseService):
    """False-alarm budgets and cached detection thresholds"""

    def __init__(self, config: ExperimentConfig, runner: TrialRunner, cache: ThresholdCacheRepository):
        super().__init__(config)
        self.runner = runner
        self.cache = cache

    def budget(self, phase: Phase) -> HypothesisBudget:
        signal = self.config.signal
        if Phase(phase) == Phase.SYNC:
            window, n_sig = signal.sync_period_s, signal.n_sync
        else:
            window = round_trip_offset(self.config.cell.radius_m, signal.speed_of_light)
            n_sig = signal.n_rach
        return hypothesis_budget(phase, window, signal.w_sig_hz, signal.r_fa, n_sig,
                                 self.config.frequency_offset_params(), signal.delay_decimals)

    def p_fa(self, phase: Phase) -> float:
        return self.budget(phase).p_fa

    def threshold(self, shape: DetectorShape, p_fa: float, cached_only: bool = False) -> ThresholdFit:
        mc = self.config.monte_carlo
        fit = self.cache.get(shape, p_fa, self.config.seed, mc.calibration_trials, mc.null_sampler.value)
        if fit is not None:
            logger.info(f"Threshold cache hit for {shape}: t={fit.threshold:.4f}")
            return fit
        if cached_only:
            raise MissingCalibrationError(f"no cached threshold for {shape} at P_FA={p_fa:.4e}")
        fit = calibrate_threshold(shape, p_fa, mc.calibration_trials, self.config.seed,
                                  tail_fraction=mc.tail_fraction, chunk_size=mc.chunk_size,
                                  mapper=self.runner.map, sampler=mc.null_sampler)
        logger.info(f"Calibrated {shape} at P_FA={p_fa:.4e}: t={fit.threshold:.4f} ({fit.method})")
        self.cache.put(fit)
        return fit

    def calibrate(self, option: OptionLike, phase: Phase, t_sig: float, k_list: Sequence[int]) -> List[ThresholdRecord]:
        option = self._option(option)
        schedule = self._schedule(option, phase)
        m = degrees_of_freedom(t_sig, self.config.signal.w_sig_hz)
        p_fa = self.p_fa(phase)
        records = []
        for k in k_list:
            shape = DetectorShape(m=m, k=k, directions=schedule.directions, n_div=self.config.signal.n_div)
            fit = self.threshold(shape, p_fa)
            records.append(ThresholdRecord(m=m, k=k, directions=shape.directions, n_div=shape.n_div,
                                           p_fa=p_fa, threshold=fit.threshold, n_trials=fit.n_trials,
                                           method=fit.method))
        return records


@dataclass(frozen=True)
class LinkOperatingPoint:
    """Detector inputs derived from an omni SNR."""
    schedule: ScanSchedule
    m: int
    snr: float  # per-dimension SNR on the true direction


class PmdService(BaseService):
    """Misdetection probability and minimum scan cycles"""

    def __init__(self, config: ExperimentConfig, runner: TrialRunner, calibration: CalibrationService):
        super().__init__(config)
        self.runner = runner
        self.calibration = calibration

    def link_point(self, option: OptionLike, phase: Phase, snr_db: float, t_sig: float) -> LinkOperatingPoint:
        """
        Per-dimension SNR: the received energy gamma0 * T_sig * W_tot * G_tx * G_rx
        spread evenly over the n_div * M dimensions, then the quantization
        transform for digital receivers.
        """
        option = self._option(option)
        phase = Phase(phase)
        signal = self.config.signal
        schedule = self._schedule(option, phase)
        m = degrees_of_freedom(t_sig, signal.w_sig_hz)
        if m < 2:
            raise ValueError(f"T_sig={t_sig} s gives M={m}, need >= 2")
        energy = db_to_linear(snr_db) * t_sig * self.config.cell.total_bandwidth_hz
        snr = energy * schedule.tx_gain * schedule.rx_gain / (signal.n_div * m)
        if option.is_digital(phase):
            bits = self.config.quantization.ue_bits if phase == Phase.SYNC else self.config.quantization.bs_bits
            snr = effective_snr(snr, quantizer_sigma(bits))
        return LinkOperatingPoint(schedule=schedule, m=m, snr=float(snr))

    def estimate_pmd(
        self,
        option: OptionLike,
        phase: Phase,
        snr_db: float,
        t_sig: float,
        k: int,
        trials: Optional[int] = None,
        cached_only: bool = False,
    ) -> PmdPoint:
        option = self._option(option)
        phase = Phase(phase)
        mc = self.config.monte_carlo
        trials = trials or mc.trials
        link = self.link_point(option, phase, snr_db, t_sig)
        shape = DetectorShape(m=link.m, k=k, directions=link.schedule.directions, n_div=self.config.signal.n_div)
        fit = self.calibration.threshold(shape, self.calibration.p_fa(phase), cached_only=cached_only)

        point = point_id("pmd", option.tag.value, option.hybrid_chains, phase.value, round(snr_db, 9),
                         round(t_sig, 12), k, self.config.channel, mc.synthesis)
        sizes = chunk_sizes(trials, chunk_size_for(shape, mc.chunk_size))
        tasks = [
            DetectionTask(
                m=link.m, k=k, n_div=shape.n_div, snr=link.snr, threshold=fit.threshold,
                seed=self.config.seed, point=point, chunk_index=i, n_trials=n,
                schedule=link.schedule, channel=self.config.channel, synthesis=mc.synthesis,
                bs_array=self.config.arrays.bs(), ue_array=self.config.arrays.ue(),
                cluster=self.config.cluster.to_config(), waveform_seed=self.config.signal.waveform_seed,
            )
            for i, n in enumerate(sizes)
        ]
        misses = self.runner.count_misses(tasks)
        pmd = misses / trials
        ci_low, ci_high = wilson_interval(misses, trials)
        logger.info(f"{option.tag.value} {phase.value} SNR={snr_db:.2f} dB K={k}: PMD={pmd:.4f} ({misses}/{trials})")
        return PmdPoint(option=option.tag.value, phase=phase.value, snr_db=snr_db, k=k,
                        trials=trials, pmd=pmd, ci95=(ci_high - ci_low) / 2.0,
                        ci_low=ci_low, ci_high=ci_high)

    def run_pmd(
        self,
        option: OptionLike,
        phase: Phase,
        snr_db: float,
        t_sig: float,
        k_list: Sequence[int],
        trials: Optional[int] = None,
        cached_only: bool = False,
    ) -> List[PmdPoint]:
        return [self.estimate_pmd(option, phase, snr_db, t_sig, k, trials, cached_only) for k in k_list]

    def min_cycles(
        self,
        option: OptionLike,
        phase: Phase,
        snr_db: float,
        t_sig: float,
        pmd_target: Optional[float] = None,
        trials: Optional[int] = None,
        percentile: Optional[str] = None,
    ) -> MinCyclesResult:
        """Smallest K with PMD <= target: doubling search, then bisection."""
        option = self._option(option)
        phase = Phase(phase)
        target = pmd_target if pmd_target is not None else self.config.monte_carlo.pmd_target
        if not 0 < target < 1:
            raise ValueError(f"pmd_target must be in (0, 1), got {target}")
        cap = self.config.monte_carlo.max_cycles
        evaluated: Dict[int, PmdPoint] = {}

        def passes(k: int) -> bool:
            if k not in evaluated:
                evaluated[k] = self.estimate_pmd(option, phase, snr_db, t_sig, k, trials)
            return evaluated[k].pmd <= target

        def result(k_star: Optional[int]) -> MinCyclesResult:
            return MinCyclesResult(option=option.tag.value, phase=phase.value, percentile=percentile,
                                   snr_db=snr_db, t_sig_us=t_sig * 1e6, k_star=k_star,
                                   achievable=k_star is not None,
                                   pmd=evaluated[k_star].pmd if k_star is not None else None)

        if passes(1):
            return result(1)
        failing, k = 1, 2
        while k < cap and not passes(k):
            failing, k = k, 2 * k
        if k >= cap:
            k = cap
            if not passes(cap):
                logger.warning(f"{option.tag.value} {phase.value} SNR={snr_db:.2f} dB: target not met within {cap} cycles")
                return result(None)
        passing = k
        while passing - failing > 1:
            mid = (failing + passing) // 2
            if passes(mid):
                passing = mid
            else:
                failing = mid
        return result(passing)


class DelayService(BaseService):
    """Detection delay versus overhead"""

    def __init__(self, config: ExperimentConfig, pmd: PmdService, snr: SnrDistributionService):
        super().__init__(config)
        self.pmd = pmd
        self.snr = snr

    def run_delay_curve(
        self,
        option: OptionLike,
        phase: Phase,
        percentile: str,
        t_sig: float,
        phi_grid: Sequence[float],
    ) -> DelayCurve:
        """delay = K* * L * T_sig / phi, K* found once for the operating point."""
        option = self._option(option)
        phase = Phase(phase)
        if not phi_grid or any(not 0 < phi <= 1 for phi in phi_grid):
            raise ValueError(f"phi grid must be a non-empty subset of (0, 1], got {list(phi_grid)}")
        point = self.snr.operating_point(percentile, phase)
        found = self.pmd.min_cycles(option, phase, point.snr_db, t_sig, percentile=percentile)
        if not found.achievable:
            raise UnachievableTargetError(
                f"{option.tag.value} {phase.value} at {percentile}: no K <= {self.config.monte_carlo.max_cycles} meets the target"
            )
        slots = self._schedule(option, phase).slots
        points = [DelayPoint(phi=phi, delay_s=detection_delay(found.k_star, slots, t_sig, phi), k_star=found.k_star)
                  for phi in phi_grid]
        return DelayCurve(option=option.tag.value, phase=phase.value, percentile=percentile,
                          t_sig_us=t_sig * 1e6, l=slots, points=points)


class BoundsService(BaseService):
    """Synchronization delay lower bounds"""

    def __init__(self, config: ExperimentConfig, pmd: PmdService, snr: SnrDistributionService):
        super().__init__(config)
        self.pmd = pmd
        self.snr = snr

    def estimate_gamma_sig(self, option: OptionLike, percentile: str, t_sig: float) -> float:
        """Accumulated SNR on the aligned direction at the K* detection point."""
        point = self.snr.operating_point(percentile, Phase.SYNC)
        found = self.pmd.min_cycles(option, Phase.SYNC, point.snr_db, t_sig, percentile=percentile)
        if not found.achievable:
            raise UnachievableTargetError(f"cannot estimate gamma_sig: target not met at {percentile}")
        link = self.pmd.link_point(option, Phase.SYNC, point.snr_db, t_sig)
        return found.k_star * self.config.signal.n_div * link.m * link.snr

    def sweep(
        self,
        options: Sequence[OptionLike],
        phi_grid: Sequence[float],
        percentile: str,
        gamma_sig: float,
    ) -> List[BoundPoint]:
        arrays = self.config.arrays
        g_tx, g_rx = float(arrays.bs().n_elements), float(arrays.ue().n_elements)
        gamma0 = db_to_linear(self.snr.operating_point(percentile, Phase.SYNC).snr_db)
        gamma_tgt = gamma0 * g_rx * g_tx
        t_min = min(self.config.signal.t_sig_us_options) * 1e-6
        points = []
        for option in (self._option(o) for o in options):
            arch = BoundArch.DIGITAL if option.ue_rx == RxArch.DIGITAL else BoundArch.ANALOG
            for phi in phi_grid:
                params = DelayBoundParams(
                    g_rx=g_rx, g_tx=g_tx, g_tx_sync=g_tx if option.sync_tx_directional else 1.0,
                    gamma_sig=gamma_sig, gamma_tgt=gamma_tgt, w_tot=self.config.cell.total_bandwidth_hz,
                    t_sig_min=t_min, phi=phi,
                )
                points.append(BoundPoint(option=option.tag.value, arch=arch.value, phi=phi,
                                         gamma_sig_db=linear_to_db(gamma_sig),
                                         gamma_tgt_db=linear_to_db(gamma_tgt),
                                         bound_s=sync_delay_bound(params, arch)))
        return points


class ServiceFactory:
    """Builds services sharing one runner, threshold cache and SNR reference"""

    def __init__(self, config: ExperimentConfig, runner: Optional[TrialRunner] = None,
                 cache: Optional[ThresholdCacheRepository] = None):
        self.config = config
        self.runner = runner or TrialRunner(runner_settings.workers)
        self.cache = cache or RepositoryFactory.get_threshold_cache(runner_settings.cache_dir)
        self._snr: Optional[SnrDistributionService] = None
        self._calibration: Optional[CalibrationService] = None
        self._pmd: Optional[PmdService] = None

    def get_snr_service(self) -> SnrDistributionService:
        if self._snr is None:
            self._snr = SnrDistributionService(self.config)
        return self._snr

    def get_calibration_service(self) -> CalibrationService:
        if self._calibration is None:
            self._calibration = CalibrationService(self.config, self.runner, self.cache)
        return self._calibration

    def get_pmd_service(self) -> PmdService:
        if self._pmd is None:
            self._pmd = PmdService(self.config, self.runner, self.get_calibration_service())
        return self._pmd

    def get_delay_service(self) -> DelayService:
        return DelayService(self.config, self.get_pmd_service(), self.get_snr_service())

    def get_bounds_service(self) -> BoundsService:
        return BoundsService(self.config, self.get_pmd_service(), self.get_snr_service())
