"""
IASim - Shared test fixtures
"""
import numpy as np
import pytest

from iasim.config import ExperimentConfig
from iasim.repositories import ThresholdCacheRepository
from iasim.services import ServiceFactory
from workers.trial_runner import TrialRunner


@pytest.fixture
def rng():
    return np.random.default_rng(20160101)


@pytest.fixture
def small_config():
    return ExperimentConfig.model_validate({
        "seed": 7,
        "monte_carlo": {
            "trials": 2000,
            "calibration_trials": 10_000,
            "n_ues": 2000,
            "max_cycles": 64,
        },
    })


@pytest.fixture
def cache(tmp_path):
    return ThresholdCacheRepository(tmp_path / "cache")


@pytest.fixture
def services(small_config, cache):
    return ServiceFactory(small_config, runner=TrialRunner(1), cache=cache)
