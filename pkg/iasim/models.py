"""
IASim - Result Models
Pydantic schemas for experiment results and run manifests
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


# =====================================================
# SNR DISTRIBUTION
# =====================================================

class SnrDistribution(BaseModel):
    direction: str
    samples_db: List[float]  # sorted ascending
    percentiles_db: Dict[str, float]


class SnrReport(BaseModel):
    dl: SnrDistribution
    ul: SnrDistribution


class OperatingPoint(BaseModel):
    """Omni SNR of a percentile tag in the phase's link direction."""
    tag: str
    phase: str
    percentile: float
    snr_db: float


# =====================================================
# DETECTION
# =====================================================

class PmdPoint(BaseModel):
    option: str
    phase: str
    snr_db: float
    k: int
    trials: int
    pmd: float = Field(ge=0.0, le=1.0)
    ci95: float = Field(ge=0.0)  # half-width of the Wilson interval
    ci_low: Optional[float] = Field(None, ge=0.0, le=1.0)
    ci_high: Optional[float] = Field(None, ge=0.0, le=1.0)


class ThresholdRecord(BaseModel):
    m: int
    k: int
    directions: int
    n_div: int
    p_fa: float
    threshold: float
    n_trials: int
    method: str


class MinCyclesResult(BaseModel):
    option: str
    phase: str
    percentile: Optional[str] = None
    snr_db: float
    t_sig_us: float
    k_star: Optional[int]
    achievable: bool
    pmd: Optional[float] = None


# =====================================================
# DELAYS AND BOUNDS
# =====================================================

class DelayPoint(BaseModel):
    phi: float
    delay_s: float
    k_star: int


class DelayCurve(BaseModel):
    option: str
    phase: str
    percentile: str
    t_sig_us: float
    l: int
    points: List[DelayPoint]


class BoundPoint(BaseModel):
    option: str
    arch: str
    phi: float
    gamma_sig_db: float
    gamma_tgt_db: float
    bound_s: float


# =====================================================
# RUN MANIFEST
# =====================================================

class RunManifest(BaseModel):
    command: str
    seed: int
    version: str
    created_at: str
    high_snr_definition: str
    files: List[str]
    config: Dict[str, Any]
