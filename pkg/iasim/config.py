"""
IASim - Configuration
Experiment parameters (JSON files) and process settings (environment)
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.beamspace import ArrayGeometry
from core.calibration import FrequencyOffsetParams, NullSampler
from core.channel import ClusterConfig, PathlossModel, PathlossParams, RadioParams


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PathlossSection(Section):
    alpha: float
    beta: float
    sigma: float

    def to_params(self) -> PathlossParams:
        return PathlossParams(alpha=self.alpha, beta=self.beta, sigma=self.sigma)


class CellConfig(Section):
    radius_m: float = Field(100.0, gt=0)
    min_distance_m: float = Field(1.0, gt=0)
    carrier_hz: float = Field(28e9, gt=0)
    los_decay_m: float = Field(67.1, gt=0)
    los: PathlossSection = PathlossSection(alpha=61.4, beta=2.0, sigma=5.8)
    nlos: PathlossSection = PathlossSection(alpha=72.0, beta=2.92, sigma=8.7)
    dl_tx_power_dbm: float = 30.0
    ul_tx_power_dbm: float = 20.0
    ue_noise_figure_db: float = 7.0
    bs_noise_figure_db: float = 4.0
    noise_psd_dbm_hz: float = -174.0
    total_bandwidth_hz: float = Field(1e9, gt=0)

    def pathloss_model(self) -> PathlossModel:
        return PathlossModel(los=self.los.to_params(), nlos=self.nlos.to_params(),
                             los_decay_m=self.los_decay_m)

    def radio(self) -> RadioParams:
        return RadioParams(
            dl_tx_power_dbm=self.dl_tx_power_dbm,
            ul_tx_power_dbm=self.ul_tx_power_dbm,
            ue_noise_figure_db=self.ue_noise_figure_db,
            bs_noise_figure_db=self.bs_noise_figure_db,
            noise_psd_dbm_hz=self.noise_psd_dbm_hz,
            total_bandwidth_hz=self.total_bandwidth_hz,
        )


class SignalConfig(Section):
    n_div: int = Field(4, ge=1)
    t_sig_us_options: Tuple[float, ...] = (10.0, 50.0, 100.0)
    w_sig_hz: float = Field(1e6, gt=0)
    r_fa: float = Field(0.01, gt=0, le=1)
    n_sync: int = Field(3, ge=1)
    n_rach: int = Field(64, ge=1)
    sync_period_s: float = Field(5e-3, gt=0)
    speed_of_light: float = Field(3e8, gt=0)
    delay_decimals: Optional[int] = 2
    waveform_seed: int = Field(0, ge=0)


class FrequencyOffsetConfig(Section):
    lo_ppm: float = Field(1.0, ge=0)
    doppler_hz: float = Field(780.0, ge=0)
    max_signal_duration_s: float = Field(100e-6, gt=0)


class ArrayConfig(Section):
    bs_rows: int = Field(8, ge=1)
    bs_cols: int = Field(8, ge=1)
    ue_rows: int = Field(4, ge=1)
    ue_cols: int = Field(4, ge=1)
    element_spacing: float = Field(0.5, gt=0)
    hybrid_chains: Optional[int] = Field(None, ge=1)

    def bs(self) -> ArrayGeometry:
        return ArrayGeometry(self.bs_rows, self.bs_cols, self.element_spacing)

    def ue(self) -> ArrayGeometry:
        return ArrayGeometry(self.ue_rows, self.ue_cols, self.element_spacing)


class QuantizationConfig(Section):
    bs_bits: int = Field(3, ge=1, le=8)
    ue_bits: int = Field(3, ge=1, le=8)  # 5 reproduces the alternate UE variant


class ClusterSection(Section):
    """Placeholder cluster statistics, not fitted measurements."""
    mean_clusters: float = Field(2.0, gt=0)
    paths_per_cluster: int = Field(10, ge=1)
    angular_spread_deg: float = Field(4.0, ge=0)
    azimuth_range_deg: Tuple[float, float] = (-60.0, 60.0)
    elevation_range_deg: Tuple[float, float] = (-20.0, 20.0)

    def to_config(self) -> ClusterConfig:
        return ClusterConfig(**self.model_dump())


class MonteCarloConfig(Section):
    trials: int = Field(10_000, ge=1)
    calibration_trials: int = Field(200_000, ge=10_000)
    tail_fraction: float = Field(0.01, gt=0, lt=1)
    null_sampler: NullSampler = NullSampler.DIRECTION_SUM
    chunk_size: int = Field(500, ge=1)
    max_cycles: int = Field(10_000, ge=1)
    pmd_target: float = Field(0.01, gt=0, lt=1)
    n_ues: int = Field(10_000, ge=1_000)
    snr_reference_seed: int = Field(2016, ge=0)
    high_snr_percentile: float = Field(95.0, gt=0, lt=100)
    synthesis: Literal["correlation", "signal"] = "correlation"


class ExperimentConfig(Section):
    """Defaults reproduce the default simulation parameter tables."""
    seed: int = Field(0, ge=0)
    channel: Literal["ideal", "cluster"] = "ideal"
    cell: CellConfig = CellConfig()
    signal: SignalConfig = SignalConfig()
    frequency_offset: FrequencyOffsetConfig = FrequencyOffsetConfig()
    arrays: ArrayConfig = ArrayConfig()
    quantization: QuantizationConfig = QuantizationConfig()
    cluster: ClusterSection = ClusterSection()
    monte_carlo: MonteCarloConfig = MonteCarloConfig()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            return cls.model_validate(json.load(fh))

    def with_overrides(
        self,
        seed: Optional[int] = None,
        trials: Optional[int] = None,
        channel: Optional[str] = None,
    ) -> "ExperimentConfig":
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
        if channel is not None:
            data["channel"] = channel
        if trials is not None:
            data["monte_carlo"]["trials"] = trials
        return type(self).model_validate(data)

    def frequency_offset_params(self) -> FrequencyOffsetParams:
        return FrequencyOffsetParams(
            lo_ppm=self.frequency_offset.lo_ppm,
            carrier_hz=self.cell.carrier_hz,
            doppler_hz=self.frequency_offset.doppler_hz,
            max_signal_duration_s=self.frequency_offset.max_signal_duration_s,
        )


class RunnerSettings(BaseSettings):
    """Process settings from IASIM_* environment variables."""
    model_config = SettingsConfigDict(env_prefix="IASIM_")

    workers: int = Field(1, ge=1)
    cache_dir: Path = Path(".iasim-cache")
    log_level: str = "INFO"


@dataclass
class AppConfig:
    title: str = "IASim"
    description: str = "Directional initial-access detection and delay simulator"
    version: str = "1.0.0"


# Singleton instances
runner_settings = RunnerSettings()
app_config = AppConfig()
