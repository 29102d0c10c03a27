import numpy as np
import pytest

from core.beamspace import Phase
from core.quantization import effective_snr, quantizer_sigma
from iasim.config import ExperimentConfig
from iasim.services import MissingCalibrationError, ServiceFactory, nearest_rank, wilson_interval
from workers.trial_runner import TrialRunner

T_SIG = 10e-6


def _factory(cache, **sections):
    data = {"seed": 7, "monte_carlo": {"trials": 2000, "calibration_trials": 10_000,
                                       "n_ues": 2000, "max_cycles": 64}}
    for key, value in sections.items():
        if isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    return ServiceFactory(ExperimentConfig.model_validate(data), runner=TrialRunner(1), cache=cache)


def test_nearest_rank():
    values = list(range(1, 101))
    assert nearest_rank(values, 1) == 1
    assert nearest_rank(values, 0.5) == 1
    assert nearest_rank(values, 50) == 50
    assert nearest_rank(values, 100) == 100


def test_wilson_interval():
    z2 = 1.959963984540054 ** 2
    low, high = wilson_interval(0, 10_000)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert high == pytest.approx(z2 / (10_000 + z2), rel=1e-9)
    low, high = wilson_interval(10_000, 10_000)
    assert low == pytest.approx(1.0 - z2 / (10_000 + z2), rel=1e-9)
    assert high == pytest.approx(1.0)
    low, high = wilson_interval(30, 1000)
    mirrored = wilson_interval(970, 1000)
    assert low < 0.03 < high
    assert low == pytest.approx(1.0 - mirrored[1])
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


class TestSnrDistribution:
    def test_deterministic(self, services):
        snr = services.get_snr_service()
        a = snr.run_snr_distribution(2000, seed=3)
        b = snr.run_snr_distribution(2000, seed=3)
        assert a.dl.samples_db == b.dl.samples_db

    def test_downlink_uplink_offset(self, services):
        report = services.get_snr_service().run_snr_distribution(2000)
        dl, ul = np.array(report.dl.samples_db), np.array(report.ul.samples_db)
        np.testing.assert_allclose(dl - ul, 7.0, atol=1e-9)
        assert set(report.dl.percentiles_db) == {"1%", "5%", "50%", "95%"}

    def test_median_stable_across_seeds(self, services):
        snr = services.get_snr_service()
        a = snr.run_snr_distribution(10_000, seed=1).dl.percentiles_db["50%"]
        b = snr.run_snr_distribution(10_000, seed=2).dl.percentiles_db["50%"]
        assert abs(a - b) < 1.0

    def test_rejects_small_runs(self, services):
        with pytest.raises(ValueError):
            services.get_snr_service().run_snr_distribution(999)

    def test_operating_points(self, services):
        snr = services.get_snr_service()
        high = snr.operating_point("high", Phase.SYNC)
        low = snr.operating_point("1%", Phase.SYNC)
        assert high.percentile == 95.0
        assert high.snr_db > low.snr_db
        assert snr.operating_point("1%", Phase.RA).snr_db == pytest.approx(low.snr_db - 7.0)
        with pytest.raises(ValueError):
            snr.percentile_value("100%")


class TestLinkPoint:
    def test_digital_receiver_pays_quantization(self, services):
        pmd = services.get_pmd_service()
        analog = pmd.link_point("ODD", Phase.SYNC, -40.0, T_SIG)
        digital = pmd.link_point("ODigDig", Phase.SYNC, -40.0, T_SIG)
        assert analog.m == digital.m == 10
        assert digital.snr == pytest.approx(effective_snr(analog.snr, quantizer_sigma(3)))

    def test_directional_gain(self, services):
        pmd = services.get_pmd_service()
        ddo = pmd.link_point("DDO", Phase.SYNC, -40.0, T_SIG)
        odd = pmd.link_point("ODD", Phase.SYNC, -40.0, T_SIG)
        assert ddo.snr / odd.snr == pytest.approx(64.0)
        assert ddo.schedule.L == 1024

    def test_too_short_signal(self, services):
        with pytest.raises(ValueError):
            services.get_pmd_service().link_point("ODD", Phase.SYNC, -40.0, 1e-6)


class TestMisdetection:
    def test_noise_level_signal_is_missed(self, services):
        point = services.get_pmd_service().estimate_pmd("DDO", Phase.RA, -100.0, T_SIG, 1)
        assert point.pmd >= 0.99
        assert point.trials == 2000

    def test_zero_misses_keep_an_interval(self, services):
        point = services.get_pmd_service().estimate_pmd("ODigDig", Phase.SYNC, -20.0, T_SIG, 1)
        z2 = 1.959963984540054 ** 2
        assert point.pmd == 0.0
        assert point.ci_low == pytest.approx(0.0, abs=1e-12)
        assert point.ci_high == pytest.approx(z2 / (2000 + z2), rel=1e-9)
        assert point.ci95 == pytest.approx(point.ci_high / 2)

    def test_monotone_in_cycles(self, services):
        points = services.get_pmd_service().run_pmd("ODigDig", Phase.SYNC, -45.0, T_SIG, [1, 4, 16])
        pmds = [p.pmd for p in points]
        assert all(b <= a + 0.02 for a, b in zip(pmds, pmds[1:]))
        assert pmds[-1] < pmds[0]

    def test_monotone_in_snr(self, services):
        pmd = services.get_pmd_service()
        values = [pmd.estimate_pmd("ODigDig", Phase.SYNC, snr, T_SIG, 4).pmd for snr in (-50.0, -40.0, -30.0)]
        assert all(b <= a + 0.02 for a, b in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_reproducible(self, services):
        pmd = services.get_pmd_service()
        a = pmd.estimate_pmd("ODD", Phase.SYNC, -45.0, T_SIG, 2)
        b = pmd.estimate_pmd("ODD", Phase.SYNC, -45.0, T_SIG, 2)
        assert a == b


class TestMinCycles:
    def test_strong_signal_needs_one_cycle(self, services):
        result = services.get_pmd_service().min_cycles("ODigDig", Phase.SYNC, -20.0, T_SIG)
        assert result.achievable and result.k_star == 1

    def test_unachievable_within_cap(self, cache):
        factory = _factory(cache, monte_carlo={"max_cycles": 4})
        result = factory.get_pmd_service().min_cycles("DDO", Phase.RA, -100.0, T_SIG)
        assert not result.achievable
        assert result.k_star is None

    def test_result_is_minimal(self, services):
        pmd = services.get_pmd_service()
        result = pmd.min_cycles("ODigDig", Phase.SYNC, -40.0, T_SIG, pmd_target=0.01)
        assert result.achievable
        assert result.pmd <= 0.01
        if result.k_star > 1:
            assert pmd.estimate_pmd("ODigDig", Phase.SYNC, -40.0, T_SIG, result.k_star - 1).pmd > 0.01

    def test_rejects_bad_target(self, services):
        with pytest.raises(ValueError):
            services.get_pmd_service().min_cycles("ODD", Phase.SYNC, -40.0, T_SIG, pmd_target=1.0)


class TestDelays:
    def test_delay_proportional_to_cycles_and_period(self, services):
        curve = services.get_delay_service().run_delay_curve("ODigDig", Phase.SYNC, "high", T_SIG, [0.05, 0.1])
        first, second = curve.points
        assert curve.l == 1
        assert first.delay_s == pytest.approx(first.k_star * curve.l * T_SIG / 0.05)
        assert first.delay_s == pytest.approx(2 * second.delay_s)

    def test_digital_designs_are_faster(self, services):
        delays = services.get_delay_service()
        result = {
            option: delays.run_delay_curve(option, Phase.SYNC, "5%", T_SIG, [0.05]).points[0].delay_s
            for option in ("ODigDig", "ODD", "DDD")
        }
        assert result["ODigDig"] <= result["ODD"] <= result["DDD"]

    def test_rejects_bad_overhead(self, services):
        with pytest.raises(ValueError):
            services.get_delay_service().run_delay_curve("ODD", Phase.SYNC, "high", T_SIG, [1.5])

    def test_digital_bound_gain(self, services):
        points = services.get_bounds_service().sweep(["ODD", "ODigDig"], [0.05], "1%", gamma_sig=100.0)
        analog, digital = points
        assert (analog.arch, digital.arch) == ("analog", "digital")
        assert analog.bound_s / digital.bound_s == pytest.approx(16.0)


class TestCalibrationService:
    def test_budgets(self, services):
        calibration = services.get_calibration_service()
        assert calibration.p_fa(Phase.SYNC) == pytest.approx(1.4493e-8, rel=1e-4)
        assert calibration.p_fa(Phase.RA) == pytest.approx(5.1079e-6, rel=1e-4)

    def test_second_calibration_hits_cache(self, services, cache):
        calibration = services.get_calibration_service()
        first = calibration.calibrate("ODigDig", Phase.SYNC, T_SIG, [1])
        second = calibration.calibrate("ODigDig", Phase.SYNC, T_SIG, [1])
        assert first == second
        assert len(cache.list_all()) == 1
        assert first[0].directions == 16

    def test_cache_only_mode(self, services):
        with pytest.raises(MissingCalibrationError):
            services.get_pmd_service().estimate_pmd("ODD", Phase.SYNC, -40.0, T_SIG, 1, cached_only=True)


class TestChannelModes:
    def test_cluster_channel_run(self, cache):
        pmd = _factory(cache, channel="cluster", arrays={"bs_rows": 4, "bs_cols": 4}).get_pmd_service()
        a = pmd.estimate_pmd("ODigDig", Phase.SYNC, -20.0, T_SIG, 1, trials=200)
        b = pmd.estimate_pmd("ODigDig", Phase.SYNC, -20.0, T_SIG, 1, trials=200)
        assert a == b
        assert 0.0 <= a.pmd < 0.5

    def test_signal_synthesis_run(self, cache):
        pmd = _factory(cache, monte_carlo={"synthesis": "signal"}).get_pmd_service()
        point = pmd.estimate_pmd("ODigDig", Phase.SYNC, -20.0, T_SIG, 1, trials=300)
        assert point.pmd <= 0.05


@pytest.mark.slow
class TestCycleCountsAtOperatingPoints:
    """Monte Carlo K* on the ideal beamspace channel at the default operating points."""

    @pytest.fixture
    def factory(self, cache):
        return ServiceFactory(ExperimentConfig(), runner=TrialRunner(1), cache=cache)

    def _k_star(self, factory, option, tag, t_sig):
        point = factory.get_snr_service().operating_point(tag, Phase.SYNC)
        result = factory.get_pmd_service().min_cycles(option, Phase.SYNC, point.snr_db, t_sig, percentile=tag)
        assert result.achievable
        return result.k_star

    @pytest.mark.parametrize("option", ["DDO", "DDD"])
    @pytest.mark.parametrize("tag", ["1%", "5%"])
    def test_directional_sync_needs_one_cycle(self, factory, option, tag):
        # about 25 dB per subsignal at the 1% point once both array gains apply
        assert self._k_star(factory, option, tag, T_SIG) == 1

    def test_digital_sync_at_cell_edge(self, factory):
        k_star = self._k_star(factory, "ODigDig", "1%", T_SIG)
        assert 2 <= k_star <= 20
        assert k_star >= self._k_star(factory, "ODigDig", "5%", T_SIG)

    @pytest.mark.parametrize("option", ["DDO", "ODD", "ODDig", "ODigDig"])
    def test_long_signals_at_high_snr_need_one_cycle(self, factory, option):
        assert self._k_star(factory, option, "high", 100e-6) == 1
