"""
IASim - Quantization Model
Low-resolution ADC effective-SNR model for fully digital receivers.
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats

logger = logging.getLogger("core.quantization")

MIN_BITS = 1
MAX_BITS = 8


class UniformQuantizer:
    """
    Midrise uniform scalar quantizer with 2^b levels at (i + 1/2) * step,
    applied per real dimension (I and Q separately).
    """

    def __init__(self, bits: int, step: float):
        if not MIN_BITS <= bits <= MAX_BITS:
            raise ValueError(f"bits must be in {MIN_BITS}..{MAX_BITS}, got {bits}")
        if step <= 0:
            raise ValueError(f"step must be positive, got {step}")
        self.bits = bits
        self.step = step
        self.levels = 2 ** bits

    def quantize(self, x: np.ndarray) -> np.ndarray:
        half = self.levels // 2
        index = np.clip(np.floor(np.asarray(x, dtype=float) / self.step), -half, half - 1)
        return (index + 0.5) * self.step

    def relative_error(self) -> float:
        """
        1 - rho^2 for a unit Gaussian input, where rho is the correlation
        between input and output. Evaluated in closed form per cell.
        """
        half = self.levels // 2
        # positive cells [i*step, (i+1)*step), outermost open to infinity
        lo = np.arange(half) * self.step
        hi = np.append(lo[1:], np.inf)
        q = (np.arange(half) + 0.5) * self.step
        cross = 2.0 * np.sum(q * (stats.norm.pdf(lo) - stats.norm.pdf(hi)))
        power = 2.0 * np.sum(q ** 2 * (stats.norm.cdf(hi) - stats.norm.cdf(lo)))
        return 1.0 - cross ** 2 / power


@dataclass(frozen=True)
class QuantizerModel:
    bits: int
    sigma: float
    step: float


@lru_cache(maxsize=MAX_BITS)
def quantizer_model(bits: int) -> QuantizerModel:
    """Uniform quantizer with the step size minimizing the relative error."""
    if not MIN_BITS <= bits <= MAX_BITS:
        raise ValueError(f"bits must be in {MIN_BITS}..{MAX_BITS}, got {bits}")

    def error(step: float) -> float:
        return UniformQuantizer(bits, step).relative_error()

    # coarse log grid, then bounded refinement around the best cell
    grid = np.geomspace(1e-3, 4.0, 400)
    values = np.array([error(s) for s in grid])
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    result = optimize.minimize_scalar(error, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-10})
    step, sigma = (float(result.x), float(result.fun)) if result.fun <= values[i] else (float(grid[i]), float(values[i]))
    logger.debug(f"b={bits}: step={step:.6f} sigma={sigma:.6e}")
    return QuantizerModel(bits=bits, sigma=sigma, step=step)


def quantizer_sigma(bits: int) -> float:
    return quantizer_model(bits).sigma


def quantization_loss_db(bits: int) -> float:
    """Low-SNR loss -10 log10(1 - sigma)."""
    return -10.0 * math.log10(1.0 - quantizer_sigma(bits))


def effective_snr(gamma_hq, sigma: float):
    """gamma_lq = (1 - sigma) gamma_hq / (1 + sigma gamma_hq)."""
    if not 0.0 <= sigma < 1.0:
        raise ValueError(f"sigma must be in [0, 1), got {sigma}")
    gamma = np.asarray(gamma_hq, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma_hq must be >= 0")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(gamma), (1.0 - sigma) / sigma if sigma > 0 else np.inf,
                       (1.0 - sigma) * gamma / (1.0 + sigma * gamma))
    return float(out) if out.ndim == 0 else out
