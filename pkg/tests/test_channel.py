import math

import numpy as np
import pytest

from core.beamspace import ArrayGeometry, DesignOption, Phase, beamspace_codebook, grid_direction, scan_schedule
from core.channel import (
    ClusterConfig,
    LinkDirection,
    LinkState,
    PathlossModel,
    beamformed_gains,
    cluster_channel,
    db_to_linear,
    drop_distances,
    fading_process,
    ideal_beamspace_channel,
    link_budget,
    link_state,
    linear_to_db,
    pathloss_db,
)


class TestLinkState:
    def test_zero_distance_is_los(self, rng):
        assert all(link_state(0.0, rng) == LinkState.LOS for _ in range(100))

    def test_decay_length_frequency(self, rng):
        n = 20_000
        hits = sum(link_state(67.1, rng) == LinkState.LOS for _ in range(n))
        p = math.exp(-1)
        assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_far_ue_is_nlos(self, rng):
        assert all(link_state(1e5, rng) == LinkState.NLOS for _ in range(100))

    def test_negative_distance(self, rng):
        with pytest.raises(ValueError):
            link_state(-1.0, rng)


class TestPathloss:
    @pytest.mark.parametrize("d,state,expected", [
        (1.0, LinkState.LOS, 61.4),
        (100.0, LinkState.LOS, 101.4),
        (100.0, LinkState.NLOS, 130.4),
    ])
    def test_median_pathloss(self, d, state, expected):
        assert pathloss_db(d, state, shadowing_db=0.0) == pytest.approx(expected, abs=1e-9)

    def test_rejects_sub_metre(self):
        with pytest.raises(ValueError):
            pathloss_db(0.5, LinkState.LOS, shadowing_db=0.0)

    def test_shadowing_spread(self, rng):
        draws = np.array([pathloss_db(10.0, LinkState.NLOS, PathlossModel(), rng=rng) for _ in range(20_000)])
        assert np.std(draws) == pytest.approx(8.7, rel=0.03)


class TestLinkBudget:
    def test_downlink(self):
        budget = link_budget(50.0, LinkDirection.DL, fixed_pathloss_db=100.0)
        assert budget.gamma0_db == pytest.approx(7.0, abs=1e-9)

    def test_uplink(self):
        budget = link_budget(50.0, LinkDirection.UL, fixed_pathloss_db=100.0)
        assert budget.gamma0_db == pytest.approx(0.0, abs=1e-9)

    def test_signal_snr(self):
        budget = link_budget(50.0, LinkDirection.DL, fixed_pathloss_db=100.0)
        assert linear_to_db(budget.signal_snr(10e-6)) == pytest.approx(47.0, abs=1e-9)
        directional = budget.directional_signal_snr(10e-6, g_tx_sync=64, g_rx=16)
        assert linear_to_db(directional) == pytest.approx(47.0 + 10 * math.log10(1024), abs=1e-9)

    def test_random_budget(self, rng):
        budget = link_budget(30.0, LinkDirection.DL, rng=rng)
        assert budget.state in (LinkState.LOS, LinkState.NLOS)
        assert budget.gamma0 > 0

    def test_db_round_trip(self):
        for x in (1e-7, 0.3, 1.0, 42.0, 1e9):
            assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)


def test_drop_distances_cover_disc(rng):
    d = drop_distances(50_000, 100.0, 1.0, rng)
    assert d.min() >= 1.0 and d.max() <= 100.0
    # uniform over area: P(d <= 50) = (50^2 - 1) / (100^2 - 1)
    assert np.mean(d <= 50.0) == pytest.approx(2499 / 9999, abs=0.01)


class TestIdealChannel:
    def test_energy_only_on_true_direction(self, rng):
        fading = fading_process(3, 4, rng)
        ch = ideal_beamspace_channel(5, fading, n_directions=16)
        np.testing.assert_array_equal(ch.gains[:, 5, :], fading)
        assert np.count_nonzero(np.delete(ch.gains, 5, axis=1)) == 0
        assert ch.effective_gain(1, 5, 2) == fading[1, 2]
        assert ch.effective_gain(1, 4, 2) == 0

    def test_zero_fading(self):
        ch = ideal_beamspace_channel(0, np.zeros((2, 4)), n_directions=4)
        assert not np.any(ch.gains)

    def test_l0_out_of_range(self):
        with pytest.raises(ValueError):
            ideal_beamspace_channel(4, np.ones((1, 1)), n_directions=4)


class TestFading:
    def test_unit_variance_and_independence(self, rng):
        psi = fading_process(25_000, 4, rng)
        assert np.mean(np.abs(psi) ** 2) == pytest.approx(1.0, abs=0.02)
        r = np.mean(psi[:, 0] * psi[:, 1].conj())
        assert abs(r) < 0.02

    def test_scalar_shape(self, rng):
        assert fading_process(1, 1, rng).shape == (1, 1)

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            fading_process(0, 4, rng)


class TestClusterChannel:
    def test_zero_clusters_rejected(self, rng):
        with pytest.raises(ValueError):
            cluster_channel(ClusterConfig(), ArrayGeometry(2, 2), ArrayGeometry(2, 2), rng, n_clusters=0)

    def test_frobenius_normalization(self, rng):
        rx, tx = ArrayGeometry(2, 2), ArrayGeometry(4, 2)
        energy = [
            np.sum(np.abs(cluster_channel(ClusterConfig(), rx, tx, rng).matrices) ** 2)
            for _ in range(10_000)
        ]
        assert np.mean(energy) == pytest.approx(4 * 8, rel=0.03)

    def _single_path(self, geometry, index):
        az, el = grid_direction(geometry, index)
        az, el = math.degrees(az), math.degrees(el)
        return ClusterConfig(mean_clusters=1, paths_per_cluster=1, angular_spread_deg=0.0,
                             azimuth_range_deg=(az, az), elevation_range_deg=(el, el))

    def test_single_on_grid_path_matches_ideal(self, rng):
        ue = ArrayGeometry(4, 4)
        config = self._single_path(ue, 5)
        raw = cluster_channel(config, ue, ue, rng, K=2, n_div=3, n_clusters=1)
        book = beamspace_codebook(ue)
        beams = np.einsum("jr,kdrt,it->kdji", book.vectors.conj(), raw.matrices, book.vectors)
        energy = np.abs(beams) ** 2
        total = energy.sum(axis=(2, 3))
        np.testing.assert_allclose(energy[:, :, 5, 5], total, rtol=1e-9)

    def test_projection_on_schedule(self, rng):
        ue = ArrayGeometry(4, 4)
        config = self._single_path(ue, 5)
        raw = cluster_channel(config, ue, ue, rng, K=2, n_div=4, n_clusters=1)
        schedule = scan_schedule(DesignOption.from_tag("ODD"), Phase.SYNC, ue, ue)
        book = beamspace_codebook(ue)
        projected = beamformed_gains(raw, schedule, book, book)
        assert projected.l0 == 5
        assert projected.gains.shape == (2, 16, 4)
        off = np.delete(projected.gains, 5, axis=1)
        assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(projected.gains))

    def test_learned_beam_for_random_access(self, rng):
        bs, ue = ArrayGeometry(4, 4), ArrayGeometry(2, 2)
        raw = cluster_channel(ClusterConfig(), bs, ue, rng, K=1, n_div=2)
        schedule = scan_schedule(DesignOption.from_tag("DDD"), Phase.RA, bs, ue)
        projected = beamformed_gains(raw, schedule, beamspace_codebook(ue), beamspace_codebook(bs))
        assert projected.gains.shape == (1, 16, 2)
        assert 0 <= projected.l0 < 16
