"""
IASim - Delay Analysis
Closed-form overhead, detection delay and synchronization delay bounds.
"""

from dataclasses import dataclass
from enum import Enum


class BoundArch(str, Enum):
    ANALOG = "analog"
    DIGITAL = "digital"


class RaOverheadMode(str, Enum):
    ANALOG = "analog"
    DIGITAL_MULTIPLEXED = "digital-multiplexed"


@dataclass(frozen=True)
class OverheadPoint:
    phi: float
    t_sig: float
    t_per: float

    def __post_init__(self):
        if not 0 < self.phi <= 1:
            raise ValueError(f"overhead must be in (0, 1], got {self.phi}")

    @classmethod
    def from_period(cls, t_sig: float, t_per: float) -> "OverheadPoint":
        return cls(phi=t_sig / t_per, t_sig=t_sig, t_per=t_per)

    @classmethod
    def from_overhead(cls, t_sig: float, phi: float) -> "OverheadPoint":
        return cls(phi=phi, t_sig=t_sig, t_per=period_for_overhead(t_sig, phi))


@dataclass(frozen=True)
class DelayBoundParams:
    g_rx: float
    g_tx: float
    g_tx_sync: float  # 1 for omni sync transmission, g_tx for directional
    gamma_sig: float
    gamma_tgt: float
    w_tot: float
    t_sig_min: float
    phi: float

    def __post_init__(self):
        for name in ("g_rx", "g_tx", "g_tx_sync", "gamma_tgt", "w_tot", "phi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gamma_sig < 0 or self.t_sig_min < 0:
            raise ValueError("gamma_sig and t_sig_min must be non-negative")


def period_for_overhead(t_sig: float, phi: float) -> float:
    if not 0 < phi <= 1:
        raise ValueError(f"overhead must be in (0, 1], got {phi}")
    return t_sig / phi


def detection_delay(k: int, l: int, t_sig: float, phi: float) -> float:
    """D = K * L * T_per = K * L * T_sig / phi, in seconds."""
    if k < 1 or l < 1:
        raise ValueError(f"need K >= 1 and L >= 1, got K={k}, L={l}")
    return k * l * period_for_overhead(t_sig, phi)


def ra_overhead(
    mode: RaOverheadMode,
    t_sig: float,
    t_per: float,
    w_sig: float = 1e6,
    n_div: int = 4,
    w_tot: float = 1e9,
    include_n_div: bool = True,
) -> float:
    """
    Analog RA occupies the whole band for T_sig per period. Digital RA is
    frequency multiplexed with data and occupies n_div * W_sig of W_tot;
    include_n_div=False drops the n_div factor.
    """
    if min(t_sig, t_per, w_sig, w_tot) <= 0 or n_div < 1:
        raise ValueError("ra_overhead inputs must be positive")
    if RaOverheadMode(mode) == RaOverheadMode.ANALOG:
        return t_sig / t_per
    bandwidth = (n_div if include_n_div else 1) * w_sig
    return bandwidth * t_sig / (w_tot * t_per)


def sync_delay_bound(params: DelayBoundParams, arch: BoundArch) -> float:
    """
    Analog: (G_rx / phi) * max(gamma_sig * G_tx / (gamma_tgt * W_tot), G_tx_sync * T_min).
    Digital receivers scan all RX directions at once, removing the G_rx factor.
    """
    per_direction = max(
        params.gamma_sig * params.g_tx / (params.gamma_tgt * params.w_tot),
        params.g_tx_sync * params.t_sig_min,
    )
    scale = params.g_rx if BoundArch(arch) == BoundArch.ANALOG else 1.0
    return scale * per_direction / params.phi
