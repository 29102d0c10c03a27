"""
IASim - Channel Engine
Link state, pathloss and omni SNR, plus idealized and multi-cluster channels.
"""

import math
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from .beamspace import (
    ArrayGeometry,
    BeamCodebook,
    BeamRef,
    ScanSchedule,
    direction_vectors,
    upa_steering,
)

logger = logging.getLogger("core.channel")


class LinkState(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"


class LinkDirection(str, Enum):
    DL = "DL"
    UL = "UL"


def db_to_linear(x_db):
    if np.ndim(x_db):
        return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    if np.ndim(x):
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(np.asarray(x, dtype=float))
    return 10.0 * math.log10(x) if x > 0 else -math.inf


# =====================================================
# PATHLOSS AND LINK BUDGET
# =====================================================

@dataclass(frozen=True)
class PathlossParams:
    alpha: float  # dB
    beta: float
    sigma: float  # dB shadowing std


LOS_PATHLOSS = PathlossParams(alpha=61.4, beta=2.0, sigma=5.8)
NLOS_PATHLOSS = PathlossParams(alpha=72.0, beta=2.92, sigma=8.7)


@dataclass(frozen=True)
class PathlossModel:
    los: PathlossParams = LOS_PATHLOSS
    nlos: PathlossParams = NLOS_PATHLOSS
    los_decay_m: float = 67.1

    def params(self, state: LinkState) -> PathlossParams:
        return self.los if LinkState(state) == LinkState.LOS else self.nlos


@dataclass(frozen=True)
class RadioParams:
    dl_tx_power_dbm: float = 30.0
    ul_tx_power_dbm: float = 20.0
    ue_noise_figure_db: float = 7.0
    bs_noise_figure_db: float = 4.0
    noise_psd_dbm_hz: float = -174.0
    total_bandwidth_hz: float = 1e9

    def tx_power_dbm(self, direction: LinkDirection) -> float:
        return self.dl_tx_power_dbm if LinkDirection(direction) == LinkDirection.DL else self.ul_tx_power_dbm

    def noise_figure_db(self, direction: LinkDirection) -> float:
        # DL is received by the UE, UL by the BS
        return self.ue_noise_figure_db if LinkDirection(direction) == LinkDirection.DL else self.bs_noise_figure_db

    def noise_floor_dbm(self, direction: LinkDirection) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.total_bandwidth_hz) + self.noise_figure_db(direction)


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    state: Optional[LinkState]
    direction: LinkDirection
    pathloss: float  # dB, shadowing included
    tx_power: float  # dBm
    noise_figure: float  # dB
    total_bandwidth_hz: float
    gamma0: float  # linear, over the full bandwidth

    @property
    def gamma0_db(self) -> float:
        return linear_to_db(self.gamma0)

    def signal_snr(self, t_sig: float) -> float:
        """Energy SNR of one transmission of duration t_sig, no beamforming."""
        return self.gamma0 * t_sig * self.total_bandwidth_hz

    def directional_signal_snr(self, t_sig: float, g_tx_sync: float, g_rx: float) -> float:
        return self.signal_snr(t_sig) * g_tx_sync * g_rx


def los_probability(distance, los_decay_m: float = 67.1):
    return np.exp(-np.asarray(distance, dtype=float) / los_decay_m)


def link_state(distance: float, rng: np.random.Generator, los_decay_m: float = 67.1) -> LinkState:
    """LOS with probability exp(-d / decay), NLOS otherwise."""
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    return LinkState.LOS if rng.random() < math.exp(-distance / los_decay_m) else LinkState.NLOS


def pathloss_db(
    distance: float,
    state: LinkState,
    params: Union[PathlossModel, PathlossParams] = PathlossModel(),
    rng: Optional[np.random.Generator] = None,
    shadowing_db: Optional[float] = None,
) -> float:
    """alpha + 10*beta*log10(d) + xi, xi ~ N(0, sigma^2) unless supplied."""
    if distance < 1.0:
        raise ValueError(f"pathloss model is valid for distance >= 1 m, got {distance}")
    p = params.params(state) if isinstance(params, PathlossModel) else params
    if shadowing_db is None:
        if rng is None:
            raise ValueError("pathloss_db needs either rng or a fixed shadowing_db")
        shadowing_db = p.sigma * rng.standard_normal()
    return p.alpha + 10.0 * p.beta * math.log10(distance) + shadowing_db


def link_budget(
    distance: float,
    direction: LinkDirection,
    radio: RadioParams = RadioParams(),
    rng: Optional[np.random.Generator] = None,
    model: PathlossModel = PathlossModel(),
    state: Optional[LinkState] = None,
    shadowing_db: Optional[float] = None,
    fixed_pathloss_db: Optional[float] = None,
) -> LinkBudget:
    """
    Omni SNR over the full bandwidth:
    gamma0 [dB] = P_tx - PL - (kT + 10 log10(W_tot) + NF).
    """
    direction = LinkDirection(direction)
    if fixed_pathloss_db is not None:
        pl = fixed_pathloss_db
    else:
        if state is None:
            if rng is None:
                raise ValueError("link_budget needs rng to draw the link state")
            state = link_state(distance, rng, model.los_decay_m)
        pl = pathloss_db(distance, state, model, rng=rng, shadowing_db=shadowing_db)

    tx_power = radio.tx_power_dbm(direction)
    gamma0_db = tx_power - pl - radio.noise_floor_dbm(direction)
    return LinkBudget(
        distance=distance,
        state=state,
        direction=direction,
        pathloss=pl,
        tx_power=tx_power,
        noise_figure=radio.noise_figure_db(direction),
        total_bandwidth_hz=radio.total_bandwidth_hz,
        gamma0=db_to_linear(gamma0_db),
    )


def drop_distances(n: int, radius_m: float, min_distance_m: float, rng: np.random.Generator) -> np.ndarray:
    """UE distances for uniform drops over the disc, clipped below at min_distance_m."""
    if not 0 < min_distance_m <= radius_m:
        raise ValueError(f"need 0 < min_distance ({min_distance_m}) <= radius ({radius_m})")
    return np.sqrt(rng.uniform(min_distance_m ** 2, radius_m ** 2, size=n))


def gamma0_db_samples(
    distances: np.ndarray,
    los: np.ndarray,
    shadowing_z: np.ndarray,
    direction: LinkDirection,
    radio: RadioParams = RadioParams(),
    model: PathlossModel = PathlossModel(),
) -> np.ndarray:
    """
    Vectorized omni SNR for pre-drawn drops.

    los is a boolean mask and shadowing_z standard normal draws scaled by
    the state's sigma, so DL and UL share the same pathloss realization.
    """
    alpha = np.where(los, model.los.alpha, model.nlos.alpha)
    beta = np.where(los, model.los.beta, model.nlos.beta)
    sigma = np.where(los, model.los.sigma, model.nlos.sigma)
    pl = alpha + 10.0 * beta * np.log10(distances) + sigma * shadowing_z
    return radio.tx_power_dbm(direction) - pl - radio.noise_floor_dbm(direction)


# =====================================================
# CHANNEL REALIZATIONS
# =====================================================

@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """
    gains[k, l, d]: effective post-beamforming gain u_l^H H v_l per cycle k,
    tested direction l and subsignal d, normalized by the schedule's nominal
    array gain. matrices[k, d] holds the raw N_rx x N_tx channel when one
    was generated.
    """
    l0: Optional[int] = None
    gains: Optional[np.ndarray] = None
    fading: Optional[np.ndarray] = None
    matrices: Optional[np.ndarray] = None

    def effective_gain(self, k: int, l: int, d: int) -> complex:
        if self.gains is None:
            raise ValueError("channel has not been projected onto a schedule")
        return complex(self.gains[k, l, d])

    @property
    def n_cycles(self) -> int:
        source = self.gains if self.gains is not None else self.matrices
        return source.shape[0]


def fading_process(K: int, n_div: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) small-scale gains, shape (K, n_div)."""
    if K < 1 or n_div < 1:
        raise ValueError(f"need K >= 1 and n_div >= 1, got K={K}, n_div={n_div}")
    return (rng.standard_normal((K, n_div)) + 1j * rng.standard_normal((K, n_div))) / np.sqrt(2.0)


def ideal_beamspace_channel(l0: int, fading: np.ndarray, n_directions: int) -> ChannelRealization:
    """Single beamspace path: gain fading[k, d] on direction l0, zero elsewhere."""
    if not 0 <= l0 < n_directions:
        raise ValueError(f"l0={l0} outside 0..{n_directions - 1}")
    fading = np.atleast_2d(np.asarray(fading, dtype=complex))
    K, n_div = fading.shape
    gains = np.zeros((K, n_directions, n_div), dtype=complex)
    gains[:, l0, :] = fading
    return ChannelRealization(l0=l0, gains=gains, fading=fading)


@dataclass(frozen=True)
class ClusterConfig:
    """Placeholder cluster statistics; override through the experiment config."""
    mean_clusters: float = 2.0
    paths_per_cluster: int = 10
    angular_spread_deg: float = 4.0
    azimuth_range_deg: Tuple[float, float] = (-60.0, 60.0)
    elevation_range_deg: Tuple[float, float] = (-20.0, 20.0)

    def __post_init__(self):
        if self.paths_per_cluster < 1:
            raise ValueError(f"paths_per_cluster must be >= 1, got {self.paths_per_cluster}")
        if self.angular_spread_deg < 0:
            raise ValueError(f"angular_spread_deg must be >= 0, got {self.angular_spread_deg}")


def _steering_matrix(geometry: ArrayGeometry, az: np.ndarray, el: np.ndarray) -> np.ndarray:
    # columns scaled to norm sqrt(N) so E||H||_F^2 = N_rx * N_tx
    scale = math.sqrt(geometry.n_elements)
    return np.stack([upa_steering(geometry, a, e) for a, e in zip(az, el)], axis=1) * scale


def cluster_channel(
    config: ClusterConfig,
    rx_array: ArrayGeometry,
    tx_array: ArrayGeometry,
    rng: np.random.Generator,
    K: int = 1,
    n_div: int = 1,
    n_clusters: Optional[int] = None,
) -> ChannelRealization:
    """
    Multi-cluster channel matrices, shape (K, n_div, N_rx, N_tx).

    Cluster geometry is drawn once; path gains are redrawn for every
    (cycle, subsignal).
    """
    if n_clusters is None:
        n_clusters = max(1, int(rng.poisson(config.mean_clusters)))
    if n_clusters < 1:
        raise ValueError(f"cluster channel needs at least one cluster, got {n_clusters}")

    spread = math.radians(config.angular_spread_deg)
    az_lo, az_hi = (math.radians(x) for x in config.azimuth_range_deg)
    el_lo, el_hi = (math.radians(x) for x in config.elevation_range_deg)
    n_paths = config.paths_per_cluster

    powers = rng.exponential(1.0, n_clusters)
    powers = powers / powers.sum()

    angles = []
    for _ in range(2):  # rx side, then tx side
        centre_az = rng.uniform(az_lo, az_hi, n_clusters)
        centre_el = rng.uniform(el_lo, el_hi, n_clusters)
        az = np.repeat(centre_az, n_paths) + spread * rng.standard_normal(n_clusters * n_paths)
        el = np.repeat(centre_el, n_paths) + spread * rng.standard_normal(n_clusters * n_paths)
        angles.append((az, el))

    a_rx = _steering_matrix(rx_array, *angles[0])
    a_tx = _steering_matrix(tx_array, *angles[1])
    path_power = np.repeat(powers / n_paths, n_paths)
    shape = (K, n_div, n_clusters * n_paths)
    g = np.sqrt(path_power / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    matrices = np.einsum("rp,kdp,tp->kdrt", a_rx, g, a_tx.conj())
    return ChannelRealization(matrices=matrices)


def learned_beam(matrices: np.ndarray, tx_codebook: BeamCodebook) -> np.ndarray:
    """TX codebook vector with the largest average received energy."""
    projected = np.einsum("kdrt,it->kdri", matrices, tx_codebook.vectors)
    energy = np.sum(np.abs(projected) ** 2, axis=(0, 1, 2))
    return tx_codebook.vectors[int(np.argmax(energy))]


def beamformed_gains(
    realization: ChannelRealization,
    schedule: ScanSchedule,
    tx_codebook: BeamCodebook,
    rx_codebook: BeamCodebook,
) -> ChannelRealization:
    """
    Project channel matrices onto every tested direction of the schedule.

    The true direction l0 is the one with the largest energy summed over
    cycles and subsignals.
    """
    if realization.matrices is None:
        raise ValueError("beamformed_gains needs channel matrices")
    learned = None
    if any(tx == BeamRef.LEARNED for tx, _ in schedule.pairs):
        learned = learned_beam(realization.matrices, tx_codebook)
    tx, rx = direction_vectors(schedule, tx_codebook, rx_codebook, learned_tx=learned)
    gains = np.einsum("lr,kdrt,lt->kld", rx.conj(), realization.matrices, tx)
    gains = gains / math.sqrt(schedule.tx_gain * schedule.rx_gain)
    energy = np.sum(np.abs(gains) ** 2, axis=(0, 2))
    return replace(realization, gains=gains, l0=int(np.argmax(energy)))
