"""
IASim - Waveform Engine
Known sync/RA subsignals and synthesis of received observations.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .beamspace import ScanSchedule
from .channel import ChannelRealization

logger = logging.getLogger("core.waveform")

MAX_CROSS_CORRELATION = 0.8
SCREEN_ATTEMPTS = 200


def degrees_of_freedom(t_sig: float, w_sig: float) -> int:
    """M = T_sig * W_sig, rounded to the nearest integer."""
    return int(round(t_sig * w_sig))


@dataclass(frozen=True, eq=False)
class SubsignalSet:
    """vectors[d] is subsignal d, a constant-modulus M-vector of energy M."""
    m: int
    n_div: int
    waveform_index: int
    vectors: np.ndarray


def _candidate(m: int, seed: int, index: int, d: int, attempt: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index, d, attempt]))
    return np.exp(2j * np.pi * rng.random(m))


@lru_cache(maxsize=16)
def waveform_family(m: int, n_div: int, size: int, seed: int = 0) -> np.ndarray:
    """
    Subsignals for waveform indices 0..size-1, shape (size, n_div, m).

    Built greedily in index order: a candidate is redrawn until its
    normalized cross-correlation with every earlier index on the same
    subsignal stays below MAX_CROSS_CORRELATION. When the bound cannot be
    met (very small M) the least-correlated candidate is kept.
    """
    family = np.empty((size, n_div, m), dtype=complex)
    for d in range(n_div):
        for index in range(size):
            earlier = family[:index, d, :]
            best, best_corr = None, np.inf
            for attempt in range(SCREEN_ATTEMPTS):
                s = _candidate(m, seed, index, d, attempt)
                corr = float(np.max(np.abs(earlier.conj() @ s)) / m) if index else 0.0
                if corr < best_corr:
                    best, best_corr = s, corr
                if corr < MAX_CROSS_CORRELATION:
                    break
            else:
                logger.warning(f"M={m}: waveform {index} subsignal {d} kept with cross-correlation {best_corr:.3f}")
            family[index, d] = best
    family.setflags(write=False)
    return family


def make_subsignals(m: int, n_div: int, waveform_index: int, seed: int = 0, family_size: int = 64) -> SubsignalSet:
    if m < 2:
        raise ValueError(f"M must be >= 2 to leave a noise dimension, got {m}")
    if n_div < 1:
        raise ValueError(f"n_div must be >= 1, got {n_div}")
    if waveform_index < 0:
        raise ValueError(f"waveform_index must be >= 0, got {waveform_index}")
    family = waveform_family(m, n_div, max(family_size, waveform_index + 1), seed)
    return SubsignalSet(m=m, n_div=n_div, waveform_index=waveform_index, vectors=family[waveform_index])


@dataclass(frozen=True, eq=False)
class ReceivedBatch:
    """samples[k, l, d] is r_kld; noise_var[k, l, d] is the tau used to draw it."""
    samples: np.ndarray
    noise_var: np.ndarray
    l0: Optional[int]


def _noise_variance(snr: float) -> float:
    if snr < 0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    if snr == 0:
        return 1.0  # signal absent
    return 0.0 if np.isinf(snr) else 1.0 / snr


def synthesize_received(
    signals: SubsignalSet,
    channel: ChannelRealization,
    schedule: ScanSchedule,
    K: int,
    snr_per_subsignal: float,
    rng: np.random.Generator,
    present: bool = True,
    noise_var: Optional[Union[float, np.ndarray]] = None,
) -> ReceivedBatch:
    """
    r_kld = h_kld * s_d + w_kld over every tested direction of the schedule.

    tau = 1 / snr for unit-power gains. snr = 0 (or present=False) draws
    the noise-only hypothesis with tau = 1.
    """
    D = schedule.directions
    expected = (K, D, signals.n_div)
    if channel.gains is None or channel.gains.shape != expected:
        shape = None if channel.gains is None else channel.gains.shape
        raise ValueError(f"channel gains {shape} do not match (K, directions, n_div) = {expected}")

    tau = _noise_variance(snr_per_subsignal)
    tau_arr = np.broadcast_to(np.asarray(tau if noise_var is None else noise_var, dtype=float), expected)
    active = present and snr_per_subsignal > 0
    gains = channel.gains if active else np.zeros(expected, dtype=complex)

    shape = expected + (signals.m,)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(tau_arr[..., None] / 2.0)
    samples = gains[..., None] * signals.vectors[None, None, :, :] + w
    return ReceivedBatch(samples=samples, noise_var=np.array(tau_arr), l0=channel.l0 if active else None)


def synthesize_correlations(
    gains: Optional[np.ndarray],
    m: int,
    snr_per_subsignal: float,
    rng: np.random.Generator,
    shape: Optional[tuple] = None,
) -> np.ndarray:
    """
    Matched-filter correlations drawn directly from their exact law.

    With r = h*s + w, w ~ CN(0, tau I), the projection onto s is
    h*sqrt(M/tau) + CN(0, 1) after scaling and the orthogonal residual is
    Gamma(M - 1), so rho = |a|^2 / (|a|^2 + G). Distributed exactly as
    synthesize_received followed by correlation. gains=None draws the
    noise-only law Beta(1, M - 1) with the given shape.
    """
    if m < 2:
        raise ValueError(f"M must be >= 2, got {m}")
    if gains is None:
        if shape is None:
            raise ValueError("noise-only draws need an explicit shape")
        mean = np.zeros(shape)
    else:
        if not np.isfinite(snr_per_subsignal) or snr_per_subsignal < 0:
            raise ValueError(f"snr must be finite and >= 0, got {snr_per_subsignal}")
        mean = gains * np.sqrt(m * snr_per_subsignal)
        shape = mean.shape
    a = mean + (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    signal = np.abs(a) ** 2
    residual = rng.gamma(m - 1, 1.0, size=shape)
    return signal / (signal + residual)
