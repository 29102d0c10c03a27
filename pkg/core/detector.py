"""
IASim - GLRT Detector
Matched-filter correlations, beamspace direction estimate and threshold decision.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .waveform import ReceivedBatch, SubsignalSet

logger = logging.getLogger("core.detector")

RHO_CEILING = 1.0 - 1e-12


class Decision(str, Enum):
    PRESENT = "present"
    ABSENT = "absent"


@dataclass(frozen=True)
class DetectionOutcome:
    l_hat: int
    statistic: float
    threshold: float
    decision: Decision

    @property
    def detected(self) -> bool:
        return self.decision == Decision.PRESENT


def correlation(s: np.ndarray, r: np.ndarray) -> float:
    """|s^H r|^2 / (||s||^2 ||r||^2), clamped below 1."""
    s_energy = float(np.vdot(s, s).real)
    r_energy = float(np.vdot(r, r).real)
    if s_energy <= 0.0 or r_energy <= 0.0:
        raise ValueError("correlation is undefined for a zero-norm vector")
    rho = abs(np.vdot(s, r)) ** 2 / (s_energy * r_energy)
    return min(rho, RHO_CEILING)


def correlate_batch(signals: SubsignalSet, batch: ReceivedBatch) -> np.ndarray:
    """Correlation tensor of shape (K, directions, n_div)."""
    s = signals.vectors
    r = batch.samples
    inner = np.einsum("dm,kldm->kld", s.conj(), r)
    r_energy = np.sum(np.abs(r) ** 2, axis=-1)
    s_energy = np.sum(np.abs(s) ** 2, axis=-1)
    if np.any(r_energy <= 0.0) or np.any(s_energy <= 0.0):
        raise ValueError("correlation is undefined for a zero-norm vector")
    rho = np.abs(inner) ** 2 / (r_energy * s_energy[None, None, :])
    return np.minimum(rho, RHO_CEILING)


def _direction_scores(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(np.isnan(rho)) or np.any(rho < 0.0) or np.any(rho > 1.0):
        raise ValueError("correlations must lie in [0, 1)")
    score = -np.log1p(-np.minimum(rho, RHO_CEILING))
    # fixed order: subsignals first, then cycles
    return score.sum(axis=-1).sum(axis=-2)


def glrt_batch(rho: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized GLRT over leading trial axes; rho has shape (..., K, L, n_div).

    Returns (l_hat, statistic) with the trailing three axes reduced.
    """
    per_direction = _direction_scores(rho)
    l_hat = np.argmax(per_direction, axis=-1)
    best = np.take_along_axis(per_direction, l_hat[..., None], axis=-1)[..., 0]
    return l_hat, m * best + 0.0


def glrt(rho: np.ndarray, m: int) -> Tuple[int, float]:
    """
    l_hat = argmin_l sum_{k,d} ln(1 - rho_kld), lowest index on ties;
    statistic T = -M * sum_{k,d} ln(1 - rho_k,l_hat,d) >= 0.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 3:
        raise ValueError(f"expected a (K, L, n_div) tensor, got shape {rho.shape}")
    l_hat, statistic = glrt_batch(rho, m)
    return int(l_hat), float(statistic)


def decide(statistic: float, threshold: float) -> Decision:
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    return Decision.PRESENT if statistic >= threshold else Decision.ABSENT


def detect(rho: np.ndarray, m: int, threshold: float) -> DetectionOutcome:
    l_hat, statistic = glrt(rho, m)
    return DetectionOutcome(l_hat=l_hat, statistic=statistic, threshold=threshold,
                            decision=decide(statistic, threshold))
