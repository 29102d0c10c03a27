"""
IASim - Beamspace Engine
Planar-array steering, Fourier beamspace codebooks and per-option scan schedules.
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger("core.beamspace")


class Phase(str, Enum):
    SYNC = "sync"
    RA = "ra"


class RxArch(str, Enum):
    OMNI = "omni"
    ANALOG = "analog"
    HYBRID = "hybrid"
    DIGITAL = "digital"


class OptionTag(str, Enum):
    DDO = "DDO"
    DDD = "DDD"
    ODD = "ODD"
    ODDIG = "ODDig"
    ODIGDIG = "ODigDig"


class BeamRef(str, Enum):
    """Non-index beam entries of a scan schedule."""
    OMNI = "omni"
    ALL = "all"          # digital receiver: every beamspace direction at once
    LEARNED = "learned"  # UE TX beam learned during synchronization


Beam = Union[int, BeamRef]

# tag -> (BS sync TX directional, UE sync RX, BS RA RX)
OPTION_TABLE: Dict[OptionTag, Tuple[bool, RxArch, RxArch]] = {
    OptionTag.DDO: (True, RxArch.ANALOG, RxArch.OMNI),
    OptionTag.DDD: (True, RxArch.ANALOG, RxArch.ANALOG),
    OptionTag.ODD: (False, RxArch.ANALOG, RxArch.ANALOG),
    OptionTag.ODDIG: (False, RxArch.ANALOG, RxArch.DIGITAL),
    OptionTag.ODIGDIG: (False, RxArch.DIGITAL, RxArch.DIGITAL),
}


# =====================================================
# ARRAYS AND CODEBOOKS
# =====================================================

@dataclass(frozen=True)
class ArrayGeometry:
    rows: int
    cols: int
    element_spacing: float = 0.5  # wavelengths

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array needs rows, cols >= 1, got {self.rows}x{self.cols}")
        if self.element_spacing <= 0:
            raise ValueError(f"element_spacing must be positive, got {self.element_spacing}")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class BeamCodebook:
    """Orthonormal beamspace directions; vectors[i] is direction i."""
    geometry: ArrayGeometry
    vectors: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Stacked codebook with one direction per column."""
        return self.vectors.T

    def project(self, x: np.ndarray) -> np.ndarray:
        """Beamspace coefficients v_i^H x."""
        return self.vectors.conj() @ x


def upa_steering(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """
    Unit-norm planar-array response, elements flattened row-major.

    Element (r, c) has phase 2*pi*spacing*(r*sin(el) + c*cos(el)*sin(az)),
    so element (0, 0) carries phase 0.
    """
    if not (math.isfinite(azimuth) and math.isfinite(elevation)):
        raise ValueError("steering angles must be finite")
    r = np.arange(geometry.rows)[:, None]
    c = np.arange(geometry.cols)[None, :]
    phase = 2.0 * np.pi * geometry.element_spacing * (
        r * np.sin(elevation) + c * np.cos(elevation) * np.sin(azimuth)
    )
    return (np.exp(1j * phase) / np.sqrt(geometry.n_elements)).ravel()


def _fourier_basis(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


@lru_cache(maxsize=32)
def beamspace_codebook(geometry: ArrayGeometry) -> BeamCodebook:
    """2D-DFT beamspace: direction m*cols + n is kron(row basis m, col basis n)."""
    rows = _fourier_basis(geometry.rows)
    cols = _fourier_basis(geometry.cols)
    vectors = np.kron(rows, cols)
    vectors.setflags(write=False)
    return BeamCodebook(geometry=geometry, vectors=vectors)


def grid_direction(geometry: ArrayGeometry, index: int) -> Optional[Tuple[float, float]]:
    """
    Physical (azimuth, elevation) whose plane wave equals codebook direction
    `index`, or None when that direction lies outside the visible region.
    """
    if not 0 <= index < geometry.n_elements:
        raise ValueError(f"direction index {index} outside 0..{geometry.n_elements - 1}")
    m, n = divmod(index, geometry.cols)
    m = m if m < (geometry.rows + 1) // 2 else m - geometry.rows
    n = n if n < (geometry.cols + 1) // 2 else n - geometry.cols
    sin_el = m / (geometry.rows * geometry.element_spacing)
    if abs(sin_el) > 1.0:
        return None
    elevation = math.asin(sin_el)
    cos_el = math.cos(elevation)
    target = n / (geometry.cols * geometry.element_spacing)
    if cos_el < 1e-12:
        return (0.0, elevation) if n == 0 else None
    sin_az = target / cos_el
    if abs(sin_az) > 1.0:
        return None
    return math.asin(sin_az), elevation


# =====================================================
# DESIGN OPTIONS AND SCHEDULES
# =====================================================

@dataclass(frozen=True)
class DesignOption:
    """
    One initial-access architecture.

    sync_tx_directional: BS sweeps its TX beams during synchronization.
    ue_rx / bs_rx: receive architecture at the UE (Sync) and BS (RA).
    hybrid_chains: S parallel RF chains for hybrid receivers.
    """
    tag: OptionTag
    sync_tx_directional: bool
    ue_rx: RxArch
    bs_rx: RxArch
    hybrid_chains: int = 1

    def __post_init__(self):
        if self.hybrid_chains < 1:
            raise ValueError(f"hybrid_chains must be >= 1, got {self.hybrid_chains}")

    @classmethod
    def from_tag(cls, tag: Union[str, OptionTag], hybrid_chains: Optional[int] = None) -> "DesignOption":
        tag = OptionTag(tag)
        directional, ue_rx, bs_rx = OPTION_TABLE[tag]
        chains = hybrid_chains or 1
        if chains > 1:
            ue_rx = RxArch.HYBRID if ue_rx == RxArch.ANALOG else ue_rx
            bs_rx = RxArch.HYBRID if bs_rx == RxArch.ANALOG else bs_rx
        return cls(tag=tag, sync_tx_directional=directional, ue_rx=ue_rx, bs_rx=bs_rx,
                   hybrid_chains=chains)

    def rx_arch(self, phase: Phase) -> RxArch:
        return self.ue_rx if Phase(phase) == Phase.SYNC else self.bs_rx

    def is_digital(self, phase: Phase) -> bool:
        return self.rx_arch(phase) == RxArch.DIGITAL


@dataclass(frozen=True)
class ScanSchedule:
    """
    Beam pairs visited in one scan cycle.

    L counts transmissions per cycle. A digital receiver (rx entry ALL)
    tests all n_rx directions within one transmission, so `directions`
    can exceed L.
    """
    phase: Phase
    L: int
    pairs: Tuple[Tuple[Beam, Beam], ...]
    n_tx: int
    n_rx: int
    rx_arch: RxArch = RxArch.ANALOG
    chains: int = 1

    def __post_init__(self):
        if self.L < 1 or self.L != len(self.pairs):
            raise ValueError(f"schedule L={self.L} does not match {len(self.pairs)} pairs")

    @property
    def slots(self) -> int:
        """Time slots per cycle; S hybrid chains cover S pairs per slot."""
        if self.rx_arch == RxArch.HYBRID:
            return math.ceil(self.L / self.chains)
        return self.L

    @property
    def directions(self) -> int:
        return sum(self.n_rx if rx == BeamRef.ALL else 1 for _, rx in self.pairs)

    @property
    def tx_gain(self) -> float:
        return 1.0 if self.pairs[0][0] == BeamRef.OMNI else float(self.n_tx)

    @property
    def rx_gain(self) -> float:
        return 1.0 if self.pairs[0][1] == BeamRef.OMNI else float(self.n_rx)

    def direction_pairs(self) -> List[Tuple[Beam, Beam]]:
        """Tested (tx, rx) hypotheses with ALL fanned out, in scan order."""
        expanded: List[Tuple[Beam, Beam]] = []
        for tx, rx in self.pairs:
            if rx == BeamRef.ALL:
                expanded.extend((tx, j) for j in range(self.n_rx))
            else:
                expanded.append((tx, rx))
        return expanded


def scan_schedule(
    option: DesignOption,
    phase: Phase,
    bs_array: ArrayGeometry,
    ue_array: ArrayGeometry,
) -> ScanSchedule:
    """
    Scan schedule for an option and phase.

    Sync: the BS transmits (OMNI or each beam) and the UE receives.
    RA: the UE transmits along its learned beam and the BS receives.
    Pairs are row-major over (tx index, rx index).
    """
    phase = Phase(phase)
    if phase == Phase.SYNC:
        n_tx, n_rx = bs_array.n_elements, ue_array.n_elements
        tx_beams: List[Beam] = list(range(n_tx)) if option.sync_tx_directional else [BeamRef.OMNI]
    else:
        n_tx, n_rx = ue_array.n_elements, bs_array.n_elements
        tx_beams = [BeamRef.LEARNED]

    arch = option.rx_arch(phase)
    if arch == RxArch.OMNI:
        rx_beams: List[Beam] = [BeamRef.OMNI]
    elif arch == RxArch.DIGITAL:
        rx_beams = [BeamRef.ALL]
    else:
        rx_beams = list(range(n_rx))

    pairs = tuple((tx, rx) for tx in tx_beams for rx in rx_beams)
    schedule = ScanSchedule(phase=phase, L=len(pairs), pairs=pairs, n_tx=n_tx, n_rx=n_rx,
                            rx_arch=arch, chains=option.hybrid_chains)
    logger.debug(f"{option.tag.value} {phase.value}: L={schedule.L} directions={schedule.directions}")
    return schedule


def direction_vectors(
    schedule: ScanSchedule,
    tx_codebook: BeamCodebook,
    rx_codebook: BeamCodebook,
    learned_tx: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Beamforming vectors for each tested direction.

    Returns (tx, rx) with shapes (directions, n_tx) and (directions, n_rx).
    OMNI is a single active element.
    """
    def resolve(beam: Beam, codebook: BeamCodebook, learned: Optional[np.ndarray]) -> np.ndarray:
        if beam == BeamRef.OMNI:
            v = np.zeros(len(codebook), dtype=complex)
            v[0] = 1.0
            return v
        if beam == BeamRef.LEARNED:
            if learned is None:
                raise ValueError("schedule uses a learned TX beam but none was supplied")
            return learned
        return codebook.vectors[int(beam)]

    pairs = schedule.direction_pairs()
    tx = np.stack([resolve(t, tx_codebook, learned_tx) for t, _ in pairs])
    rx = np.stack([resolve(r, rx_codebook, None) for _, r in pairs])
    return tx, rx
