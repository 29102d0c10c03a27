"""
IASim - Repository Layer
Result files and the threshold cache, one repository per file
"""
import csv
import json
import logging
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from core.calibration import DetectorShape, NullSampler, ThresholdFit

from .models import (
    BoundPoint,
    DelayCurve,
    MinCyclesResult,
    PmdPoint,
    RunManifest,
    SnrReport,
    ThresholdRecord,
)

logger = logging.getLogger("iasim.repositories")

PathLike = Union[str, Path]


class ResultsIOError(OSError):
    """File access failure; the message names the path."""


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    if value is None:
        return ""
    return str(value)


class BaseRepository(ABC):
    """Abstract base repository - one file per repository"""

    def __init__(self, directory: PathLike):
        self.directory = Path(directory)

    @property
    @abstractmethod
    def file_name(self) -> str:
        pass

    @property
    def path(self) -> Path:
        return self.directory / self.file_name

    def _write_text(self, text: str) -> Path:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with tmp.open("w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, self.path)
        except OSError as e:
            raise ResultsIOError(f"cannot write {self.path}: {e}") from e
        logger.info(f"Wrote {self.path}")
        return self.path


# =====================================================
# CSV RESULT FILES
# =====================================================

class CsvRepository(BaseRepository):
    """RFC-4180 CSV with a fixed header"""

    @property
    @abstractmethod
    def columns(self) -> List[str]:
        pass

    def write_rows(self, rows: Iterable[Sequence[Any]]) -> Path:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with self.path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\r\n")
                writer.writerow(self.columns)
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
        except OSError as e:
            raise ResultsIOError(f"cannot write {self.path}: {e}") from e
        logger.info(f"Wrote {self.path}")
        return self.path

    def read_rows(self) -> List[Dict[str, str]]:
        try:
            with self.path.open("r", encoding="utf-8", newline="") as fh:
                return list(csv.DictReader(fh))
        except OSError as e:
            raise ResultsIOError(f"cannot read {self.path}: {e}") from e


class PmdRepository(CsvRepository):
    file_name = "pmd.csv"
    columns = ["option", "phase", "snr_db", "K", "trials", "pmd", "ci95"]

    def save(self, points: List[PmdPoint]) -> Path:
        return self.write_rows(
            (p.option, p.phase, p.snr_db, p.k, p.trials, p.pmd, p.ci95) for p in points
        )


class DelayRepository(CsvRepository):
    file_name = "delay.csv"
    columns = ["option", "phase", "percentile", "T_sig_us", "phi", "K_star", "L", "delay_ms"]

    def save(self, curves: List[DelayCurve]) -> Path:
        return self.write_rows(
            (c.option, c.phase, c.percentile, c.t_sig_us, p.phi, p.k_star, c.l, p.delay_s * 1e3)
            for c in curves for p in c.points
        )


class SnrRepository(CsvRepository):
    file_name = "snr.csv"
    columns = ["direction", "percentile", "snr_db"]

    def save(self, report: SnrReport) -> Path:
        return self.write_rows(
            (dist.direction, tag, value)
            for dist in (report.dl, report.ul)
            for tag, value in dist.percentiles_db.items()
        )


class SnrCdfRepository(CsvRepository):
    file_name = "snr_cdf.csv"
    columns = ["direction", "rank", "cdf", "snr_db"]

    def save(self, report: SnrReport) -> Path:
        def rows():
            for dist in (report.dl, report.ul):
                n = len(dist.samples_db)
                for i, value in enumerate(dist.samples_db, start=1):
                    yield dist.direction, i, i / n, value
        return self.write_rows(rows())


class ThresholdTableRepository(CsvRepository):
    file_name = "thresholds.csv"
    columns = ["M", "K", "L", "N_div", "P_FA", "threshold", "n_trials", "method"]

    def save(self, records: List[ThresholdRecord]) -> Path:
        return self.write_rows(
            (r.m, r.k, r.directions, r.n_div, r.p_fa, r.threshold, r.n_trials, r.method) for r in records
        )


class MinCyclesRepository(CsvRepository):
    file_name = "min_cycles.csv"
    columns = ["option", "phase", "percentile", "snr_db", "T_sig_us", "K_star", "achievable", "pmd"]

    def save(self, results: List[MinCyclesResult]) -> Path:
        return self.write_rows(
            (r.option, r.phase, r.percentile, r.snr_db, r.t_sig_us, r.k_star, r.achievable, r.pmd)
            for r in results
        )


class BoundsRepository(CsvRepository):
    file_name = "bounds.csv"
    columns = ["option", "arch", "phi", "gamma_sig_db", "gamma_tgt_db", "bound_ms"]

    def save(self, points: List[BoundPoint]) -> Path:
        return self.write_rows(
            (p.option, p.arch, p.phi, p.gamma_sig_db, p.gamma_tgt_db, p.bound_s * 1e3) for p in points
        )


class ManifestRepository(BaseRepository):
    file_name = "manifest.json"

    def save(self, manifest: RunManifest) -> Path:
        return self._write_text(json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n")


# =====================================================
# THRESHOLD CACHE
# =====================================================

class ThresholdCacheRepository(BaseRepository):
    """JSON cache of calibrated thresholds shared across runs"""
    file_name = "thresholds.json"

    def __init__(self, directory: PathLike):
        super().__init__(directory)
        self._entries: Optional[Dict[str, Dict[str, Any]]] = None

    @staticmethod
    def key(shape: DetectorShape, p_fa: float, seed: int, n_trials: int,
            sampler: str = NullSampler.DIRECTION_SUM.value) -> str:
        return (f"M={shape.m}|K={shape.k}|L={shape.directions}|N_div={shape.n_div}"
                f"|P_FA={p_fa:.6e}|seed={seed}|trials={n_trials}|sampler={NullSampler(sampler).value}")

    def _load(self) -> Dict[str, Dict[str, Any]]:
        if self._entries is None:
            self._entries = {}
            if self.path.exists():
                try:
                    with self.path.open("r", encoding="utf-8") as fh:
                        self._entries = json.load(fh)
                except json.JSONDecodeError as e:
                    logger.warning(f"Ignoring unreadable threshold cache {self.path}: {e}")
                except OSError as e:
                    raise ResultsIOError(f"cannot read {self.path}: {e}") from e
        return self._entries

    def get(self, shape: DetectorShape, p_fa: float, seed: int, n_trials: int,
            sampler: str = NullSampler.DIRECTION_SUM.value) -> Optional[ThresholdFit]:
        entry = self._load().get(self.key(shape, p_fa, seed, n_trials, sampler))
        return ThresholdFit.from_dict(entry) if entry else None

    def put(self, fit: ThresholdFit) -> None:
        entries = self._load()
        entries[self.key(fit.shape, fit.target_pfa, fit.seed, fit.n_trials, fit.sampler)] = fit.to_dict()
        self._write_text(json.dumps(entries, indent=1, sort_keys=True))

    def list_all(self) -> List[ThresholdFit]:
        return [ThresholdFit.from_dict(v) for _, v in sorted(self._load().items())]


class RepositoryFactory:
    """Factory for creating repository instances"""

    @staticmethod
    def get_pmd_repo(out_dir: PathLike) -> PmdRepository:
        return PmdRepository(out_dir)

    @staticmethod
    def get_delay_repo(out_dir: PathLike) -> DelayRepository:
        return DelayRepository(out_dir)

    @staticmethod
    def get_snr_repo(out_dir: PathLike) -> SnrRepository:
        return SnrRepository(out_dir)

    @staticmethod
    def get_snr_cdf_repo(out_dir: PathLike) -> SnrCdfRepository:
        return SnrCdfRepository(out_dir)

    @staticmethod
    def get_threshold_table_repo(out_dir: PathLike) -> ThresholdTableRepository:
        return ThresholdTableRepository(out_dir)

    @staticmethod
    def get_min_cycles_repo(out_dir: PathLike) -> MinCyclesRepository:
        return MinCyclesRepository(out_dir)

    @staticmethod
    def get_bounds_repo(out_dir: PathLike) -> BoundsRepository:
        return BoundsRepository(out_dir)

    @staticmethod
    def get_manifest_repo(out_dir: PathLike) -> ManifestRepository:
        return ManifestRepository(out_dir)

    @staticmethod
    def get_threshold_cache(cache_dir: PathLike) -> ThresholdCacheRepository:
        return ThresholdCacheRepository(cache_dir)
