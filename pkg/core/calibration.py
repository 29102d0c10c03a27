"""
IASim - Threshold Calibration
False-alarm budgeting and Monte Carlo threshold calibration with
quadratic log-tail extrapolation.
"""

import math
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import stats

from .beamspace import Phase
from .detector import glrt_batch
from .seeding import chunk_rng, chunk_sizes, point_id
from .waveform import synthesize_correlations

logger = logging.getLogger("core.calibration")

SPEED_OF_LIGHT = 3e8
MIN_CALIBRATION_TRIALS = 10_000
MAX_CHUNK_ELEMENTS = 4_000_000

Mapper = Callable[[Callable, Iterable], Iterable]


class DegenerateTailError(ValueError):
    """Fitted log-survival is not decreasing where the target is reached."""


class NullSampler(str, Enum):
    """How noise-only statistics are drawn."""
    CELLS = "cells"  # every (K, L, n_div) correlation, then the GLRT
    DIRECTION_SUM = "direction_sum"  # per-direction sums from their Gamma law


# =====================================================
# FALSE-ALARM BUDGET
# =====================================================

@dataclass(frozen=True)
class FrequencyOffsetParams:
    lo_ppm: float = 1.0
    carrier_hz: float = 28e9
    doppler_hz: float = 780.0
    max_signal_duration_s: float = 100e-6

    @property
    def max_offset_hz(self) -> float:
        return self.lo_ppm * 1e-6 * self.carrier_hz + self.doppler_hz

    @property
    def resolution_hz(self) -> float:
        return 1.0 / (4.0 * self.max_signal_duration_s)

    @property
    def n_hypotheses(self) -> int:
        # nearest integer: 2 * 28.78 kHz / 2.5 kHz = 23.02 -> 23
        return max(1, int(round(2.0 * self.max_offset_hz / self.resolution_hz)))


@dataclass(frozen=True)
class HypothesisBudget:
    phase: Phase
    n_sig: int
    n_dly: float
    n_fo: int
    r_fa: float

    def __post_init__(self):
        if self.n_sig <= 0 or self.n_dly <= 0 or self.n_fo <= 0:
            raise ValueError(f"hypothesis counts must be positive: {self}")
        if not 0 < self.r_fa <= 1:
            raise ValueError(f"r_fa must be in (0, 1], got {self.r_fa}")

    @property
    def n_hyp(self) -> float:
        return self.n_sig * self.n_dly * self.n_fo

    @property
    def p_fa(self) -> float:
        return self.r_fa / self.n_hyp


def round_trip_offset(cell_radius_m: float, speed_of_light: float = SPEED_OF_LIGHT) -> float:
    return 2.0 * cell_radius_m / speed_of_light


def delay_hypotheses(w_sig: float, window_s: float, decimals: Optional[int] = 2) -> float:
    """2 * W_sig * window, kept real-valued and rounded to `decimals`."""
    n = 2.0 * w_sig * window_s
    return round(n, decimals) if decimals is not None else n


def hypothesis_budget(
    phase: Phase,
    window_s: float,
    w_sig: float,
    r_fa: float,
    n_sig: int,
    fo: FrequencyOffsetParams = FrequencyOffsetParams(),
    decimals: Optional[int] = 2,
) -> HypothesisBudget:
    """
    window_s is the sync period T_per for Sync and the round-trip offset
    2 * radius / c for RA.
    """
    if window_s <= 0 or w_sig <= 0:
        raise ValueError(f"window and W_sig must be positive, got {window_s}, {w_sig}")
    return HypothesisBudget(
        phase=Phase(phase),
        n_sig=n_sig,
        n_dly=delay_hypotheses(w_sig, window_s, decimals),
        n_fo=fo.n_hypotheses,
        r_fa=r_fa,
    )


# =====================================================
# THRESHOLD CALIBRATION
# =====================================================

@dataclass(frozen=True)
class DetectorShape:
    """Detector dimensions that determine the null law of the statistic."""
    m: int
    k: int
    directions: int
    n_div: int

    def __post_init__(self):
        if self.m < 2 or self.k < 1 or self.directions < 1 or self.n_div < 1:
            raise ValueError(f"invalid detector shape {self}")

    @property
    def cells(self) -> int:
        return self.k * self.directions * self.n_div


@dataclass(frozen=True)
class ThresholdFit:
    threshold: float
    target_pfa: float
    coefficients: Tuple[float, float, float]  # log P(T > t) = a + b t + c t^2
    n_trials: int
    tail_points: Tuple[Tuple[float, float], ...]
    shape: DetectorShape
    seed: int
    method: str = "fit"
    sampler: str = NullSampler.DIRECTION_SUM.value

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ThresholdFit":
        data = dict(data)
        data["shape"] = DetectorShape(**data["shape"])
        data["coefficients"] = tuple(data["coefficients"])
        data["tail_points"] = tuple(tuple(p) for p in data["tail_points"])
        return cls(**data)


def chunk_size_for(shape: DetectorShape, requested: int, sampler: NullSampler = NullSampler.CELLS) -> int:
    elements = shape.directions if NullSampler(sampler) == NullSampler.DIRECTION_SUM else shape.cells
    return max(1, min(requested, MAX_CHUNK_ELEMENTS // elements))


def null_statistic_chunk(task: Tuple[DetectorShape, int, int, int, int, str]) -> np.ndarray:
    """
    Noise-only GLRT statistics for one chunk of trials.

    Under noise each -ln(1 - rho) is Exp(1)/(M - 1), so a direction's
    sum over K * n_div cells is Gamma(K * n_div)/(M - 1) and T is M times
    the largest sum. DIRECTION_SUM draws those sums directly.
    """
    shape, seed, point, chunk_index, n, sampler = task
    rng = chunk_rng(seed, point, chunk_index)
    if NullSampler(sampler) == NullSampler.DIRECTION_SUM:
        sums = rng.standard_gamma(shape.k * shape.n_div, size=(n, shape.directions))
        return shape.m / (shape.m - 1) * sums.max(axis=1)
    rho = synthesize_correlations(None, shape.m, 0.0, rng,
                                  shape=(n, shape.k, shape.directions, shape.n_div))
    _, statistic = glrt_batch(rho, shape.m)
    return statistic


def null_statistics(
    shape: DetectorShape,
    n_trials: int,
    seed: int,
    chunk_size: int = 1000,
    mapper: Mapper = map,
    purpose: str = "calibrate",
    sampler: NullSampler = NullSampler.DIRECTION_SUM,
) -> np.ndarray:
    sampler = NullSampler(sampler)
    point = point_id(purpose, sampler.value, shape.m, shape.k, shape.directions, shape.n_div)
    sizes = chunk_sizes(n_trials, chunk_size_for(shape, chunk_size, sampler))
    tasks = [(shape, seed, point, i, n, sampler.value) for i, n in enumerate(sizes)]
    return np.concatenate(list(mapper(null_statistic_chunk, tasks)))


def fit_tail(
    statistics: np.ndarray,
    target_pfa: float,
    tail_fraction: float = 0.01,
    min_tail_points: int = 10,
) -> Tuple[float, Tuple[float, float, float], Tuple[Tuple[float, float], ...], str]:
    """
    Least-squares fit of log P(T > t) over the upper tail.

    The i-th largest statistic has empirical survival i/n. The quadratic
    is kept only when it is concave (c2 <= 0); a convex fit is replaced
    by a straight line. Targets above the fit window use the
    empirical quantile; smaller targets are solved on the decreasing
    branch of the fit.
    """
    n = len(statistics)
    ordered = np.sort(statistics)[::-1]
    n_tail = min(n, max(min_tail_points, int(math.ceil(tail_fraction * n))))
    t_tail = ordered[:n_tail]
    log_p = np.log(np.arange(1, n_tail + 1) / n)
    points = tuple((float(t), float(lp)) for t, lp in zip(t_tail, log_p))

    c2, c1, c0 = np.polyfit(t_tail, log_p, 2)
    method = "fit"
    if c2 > 0:
        c1, c0 = np.polyfit(t_tail, log_p, 1)
        c2, method = 0.0, "linear"
    coefficients = (float(c0), float(c1), float(c2))

    if target_pfa >= 1.0:
        return 0.0, coefficients, points, "trivial"
    if target_pfa > n_tail / n:
        return max(0.0, float(np.quantile(statistics, 1.0 - target_pfa))), coefficients, points, "empirical"

    target = math.log(target_pfa)
    roots = np.roots([c2, c1, c0 - target]) if c2 != 0 else np.roots([c1, c0 - target])
    t_low = float(t_tail[-1])
    width = float(t_tail[0] - t_tail[-1])
    candidates = sorted(
        float(r.real) for r in roots
        if abs(r.imag) < 1e-9 and r.real >= t_low - width and c1 + 2.0 * c2 * r.real < 0
    )
    if not candidates:
        raise DegenerateTailError(
            f"log-tail fit {coefficients} is not decreasing to log({target_pfa:.3e}) above t={t_low:.4f}"
        )
    return max(0.0, candidates[0]), coefficients, points, method


def calibrate_threshold(
    shape: DetectorShape,
    target_pfa: float,
    n_trials: int,
    seed: int,
    tail_fraction: float = 0.01,
    chunk_size: int = 1000,
    mapper: Mapper = map,
    sampler: NullSampler = NullSampler.DIRECTION_SUM,
) -> ThresholdFit:
    """Threshold t with P(T >= t | noise only) = target_pfa."""
    sampler = NullSampler(sampler)
    if target_pfa <= 0:
        raise ValueError(f"target P_FA must be positive, got {target_pfa}")
    if target_pfa >= 1.0:
        return ThresholdFit(threshold=0.0, target_pfa=target_pfa, coefficients=(0.0, 0.0, 0.0),
                            n_trials=0, tail_points=(), shape=shape, seed=seed, method="trivial",
                            sampler=sampler.value)
    if n_trials < MIN_CALIBRATION_TRIALS:
        raise ValueError(f"calibration needs >= {MIN_CALIBRATION_TRIALS} trials, got {n_trials}")

    statistics = null_statistics(shape, n_trials, seed, chunk_size, mapper, sampler=sampler)
    threshold, coefficients, points, method = fit_tail(statistics, target_pfa, tail_fraction)
    logger.debug(f"{shape}: tail fit {coefficients} -> t={threshold:.4f} ({method})")
    return ThresholdFit(threshold=threshold, target_pfa=target_pfa, coefficients=coefficients,
                        n_trials=n_trials, tail_points=points, shape=shape, seed=seed, method=method,
                        sampler=sampler.value)


def analytic_threshold(shape: DetectorShape, target_pfa: float) -> float:
    """
    Exact threshold from the null law: per direction T*(M-1)/M is
    Gamma(K*n_div, 1), and T is the maximum over independent directions.
    """
    if target_pfa >= 1.0:
        return 0.0
    per_direction = -math.expm1(math.log1p(-target_pfa) / shape.directions)
    return shape.m / (shape.m - 1) * float(stats.gamma.isf(per_direction, shape.k * shape.n_div))


def empirical_false_alarm_rate(
    shape: DetectorShape,
    threshold: float,
    n_trials: int,
    seed: int,
    chunk_size: int = 1000,
    mapper: Mapper = map,
    sampler: NullSampler = NullSampler.CELLS,
) -> float:
    """False-alarm rate at `threshold` on fresh noise-only trials."""
    statistics = null_statistics(shape, n_trials, seed, chunk_size, mapper, purpose="verify", sampler=sampler)
    return float(np.mean(statistics >= threshold))
