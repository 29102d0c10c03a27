"""
IASim - Trial Runner
Executes Monte Carlo trial chunks serially or on a process pool.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, List, Optional

import numpy as np

from core.beamspace import ArrayGeometry, Phase, ScanSchedule, beamspace_codebook
from core.channel import (
    ChannelRealization,
    ClusterConfig,
    beamformed_gains,
    cluster_channel,
    ideal_beamspace_channel,
)
from core.detector import correlate_batch, glrt_batch
from core.seeding import chunk_rng
from core.waveform import make_subsignals, synthesize_correlations, synthesize_received

logger = logging.getLogger("trial-runner")


# =====================================================
# ACTIVITIES (Individual units of work)
# =====================================================

@dataclass(frozen=True)
class DetectionTask:
    """
    One chunk of signal-present trials at a fixed operating point.

    snr is the per-dimension SNR after beamforming (and quantization)
    on the true direction.
    """
    m: int
    k: int
    n_div: int
    snr: float
    threshold: float
    seed: int
    point: int
    chunk_index: int
    n_trials: int
    schedule: ScanSchedule
    channel: str = "ideal"
    synthesis: str = "correlation"
    bs_array: Optional[ArrayGeometry] = None
    ue_array: Optional[ArrayGeometry] = None
    cluster: Optional[ClusterConfig] = None
    waveform_index: int = 0
    waveform_seed: int = 0


def _ideal_gains(task: DetectionTask, rng: np.random.Generator):
    D = task.schedule.directions
    n = task.n_trials
    l0 = rng.integers(D, size=n)
    shape = (n, task.k, task.n_div)
    fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    gains = np.zeros((n, task.k, D, task.n_div), dtype=complex)
    gains[np.arange(n), :, l0, :] = fading
    return gains, l0


def _cluster_gains(task: DetectionTask, rng: np.random.Generator):
    if task.bs_array is None or task.ue_array is None or task.cluster is None:
        raise ValueError("cluster trials need both arrays and a cluster config")
    if task.schedule.phase == Phase.SYNC:
        tx_array, rx_array = task.bs_array, task.ue_array
    else:
        tx_array, rx_array = task.ue_array, task.bs_array
    tx_cb, rx_cb = beamspace_codebook(tx_array), beamspace_codebook(rx_array)
    gains, l0 = [], []
    for _ in range(task.n_trials):
        raw = cluster_channel(task.cluster, rx_array, tx_array, rng, K=task.k, n_div=task.n_div)
        projected = beamformed_gains(raw, task.schedule, tx_cb, rx_cb)
        gains.append(projected.gains)
        l0.append(projected.l0)
    return np.stack(gains), np.array(l0)


def _signal_correlations(task: DetectionTask, gains: np.ndarray, l0: np.ndarray, rng: np.random.Generator):
    signals = make_subsignals(task.m, task.n_div, task.waveform_index, task.waveform_seed)
    rho = np.empty(gains.shape)
    for t in range(task.n_trials):
        realization = ChannelRealization(l0=int(l0[t]), gains=gains[t])
        batch = synthesize_received(signals, realization, task.schedule, task.k, task.snr, rng)
        rho[t] = correlate_batch(signals, batch)
    return rho


def detection_chunk(task: DetectionTask) -> int:
    """Count misdetections (absent, or present on the wrong direction)."""
    rng = chunk_rng(task.seed, task.point, task.chunk_index)
    if task.channel == "cluster":
        gains, l0 = _cluster_gains(task, rng)
    else:
        gains, l0 = _ideal_gains(task, rng)

    if task.synthesis == "signal":
        rho = _signal_correlations(task, gains, l0, rng)
    else:
        rho = synthesize_correlations(gains, task.m, task.snr, rng)

    l_hat, statistic = glrt_batch(rho, task.m)
    missed = (statistic < task.threshold) | (l_hat != l0)
    return int(np.count_nonzero(missed))


# =====================================================
# RUNNER
# =====================================================

class TrialRunner:
    """
    Maps chunk activities over workers. Results come back in task order,
    and each chunk seeds itself, so the worker count never changes results.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers

    def map(self, fn: Callable[[Any], Any], tasks: Iterable[Any]) -> List[Any]:
        tasks = list(tasks)
        if self.workers == 1 or len(tasks) <= 1:
            return [fn(t) for t in tasks]
        logger.debug(f"Dispatching {len(tasks)} chunks to {self.workers} workers")
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, tasks))

    def count_misses(self, tasks: List[DetectionTask]) -> int:
        return int(sum(self.map(detection_chunk, tasks)))
