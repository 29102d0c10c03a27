import math

import numpy as np
import pytest

from core.beamspace import (
    ArrayGeometry,
    BeamRef,
    DesignOption,
    OptionTag,
    Phase,
    RxArch,
    beamspace_codebook,
    direction_vectors,
    grid_direction,
    scan_schedule,
    upa_steering,
)

BS = ArrayGeometry(8, 8)
UE = ArrayGeometry(4, 4)


class TestSteering:
    def test_single_element_is_one(self):
        v = upa_steering(ArrayGeometry(1, 1), 0.7, -0.3)
        assert v.shape == (1,)
        assert v[0] == pytest.approx(1.0)

    def test_broadside_is_uniform(self):
        v = upa_steering(BS, 0.0, 0.0)
        np.testing.assert_allclose(v, np.full(64, 1 / 8), atol=1e-15)

    def test_matches_element_phase_formula(self):
        az, el = math.radians(30), 0.0
        v = upa_steering(BS, az, el)
        expected = np.empty(64, dtype=complex)
        for r in range(8):
            for c in range(8):
                phase = 2 * math.pi * 0.5 * (r * math.sin(el) + c * math.cos(el) * math.sin(az))
                expected[r * 8 + c] = complex(math.cos(phase), math.sin(phase)) / 8
        np.testing.assert_allclose(v, expected, atol=1e-12)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_finite_angles(self):
        with pytest.raises(ValueError):
            upa_steering(UE, float("nan"), 0.0)


class TestCodebook:
    @pytest.mark.parametrize("rows,cols", [(1, 1), (4, 4), (8, 8), (2, 4)])
    def test_unitary(self, rows, cols):
        book = beamspace_codebook(ArrayGeometry(rows, cols))
        u = book.matrix
        np.testing.assert_allclose(u.conj().T @ u, np.eye(rows * cols), atol=1e-9)
        np.testing.assert_allclose(np.linalg.norm(book.vectors, axis=1), 1.0, atol=1e-12)

    def test_grid_plane_wave_concentrates_in_one_coefficient(self):
        book = beamspace_codebook(BS)
        index = 1 * 8 + 2
        az, el = grid_direction(BS, index)
        coeffs = book.project(upa_steering(BS, az, el))
        assert abs(coeffs[index]) == pytest.approx(1.0, abs=1e-9)
        others = np.delete(np.abs(coeffs), index)
        assert np.max(others) < 1e-9

    def test_invisible_grid_direction(self):
        # sin(el) = -1 leaves no room for a non-zero column frequency
        assert grid_direction(UE, 2 * 4 + 1) is None


class TestSchedules:
    @pytest.mark.parametrize("tag,phase,expected", [
        (OptionTag.DDO, Phase.SYNC, 1024),
        (OptionTag.DDD, Phase.SYNC, 1024),
        (OptionTag.ODD, Phase.SYNC, 16),
        (OptionTag.ODDIG, Phase.SYNC, 16),
        (OptionTag.ODIGDIG, Phase.SYNC, 1),
        (OptionTag.DDO, Phase.RA, 1),
        (OptionTag.DDD, Phase.RA, 64),
        (OptionTag.ODD, Phase.RA, 64),
        (OptionTag.ODDIG, Phase.RA, 1),
        (OptionTag.ODIGDIG, Phase.RA, 1),
    ])
    def test_scan_length(self, tag, phase, expected):
        schedule = scan_schedule(DesignOption.from_tag(tag), phase, BS, UE)
        assert schedule.L == expected
        assert len(schedule.pairs) == expected

    def test_digital_receivers_test_every_direction(self):
        sync = scan_schedule(DesignOption.from_tag("ODigDig"), Phase.SYNC, BS, UE)
        ra = scan_schedule(DesignOption.from_tag("ODDig"), Phase.RA, BS, UE)
        assert sync.directions == 16
        assert ra.directions == 64
        assert sync.pairs == ((BeamRef.OMNI, BeamRef.ALL),)

    def test_row_major_pair_order(self):
        schedule = scan_schedule(DesignOption.from_tag("DDO"), Phase.SYNC, BS, UE)
        assert schedule.pairs[0] == (0, 0)
        assert schedule.pairs[1] == (0, 1)
        assert schedule.pairs[16] == (1, 0)

    def test_omni_only_where_option_dictates(self):
        ddd = scan_schedule(DesignOption.from_tag("DDD"), Phase.SYNC, BS, UE)
        assert all(BeamRef.OMNI not in pair for pair in ddd.pairs)
        ddo_ra = scan_schedule(DesignOption.from_tag("DDO"), Phase.RA, BS, UE)
        assert ddo_ra.pairs == ((BeamRef.LEARNED, BeamRef.OMNI),)

    def test_gains(self):
        ddo = scan_schedule(DesignOption.from_tag("DDO"), Phase.SYNC, BS, UE)
        odd = scan_schedule(DesignOption.from_tag("ODD"), Phase.SYNC, BS, UE)
        ddo_ra = scan_schedule(DesignOption.from_tag("DDO"), Phase.RA, BS, UE)
        assert (ddo.tx_gain, ddo.rx_gain) == (64, 16)
        assert (odd.tx_gain, odd.rx_gain) == (1, 16)
        assert (ddo_ra.tx_gain, ddo_ra.rx_gain) == (16, 1)

    def test_hybrid_chains_divide_slots(self):
        option = DesignOption.from_tag("ODD", hybrid_chains=4)
        assert option.ue_rx == RxArch.HYBRID
        schedule = scan_schedule(option, Phase.SYNC, BS, UE)
        assert schedule.L == 16
        assert schedule.slots == 4
        ra = scan_schedule(option, Phase.RA, BS, UE)
        assert ra.slots == math.ceil(64 / 4)

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            ArrayGeometry(0, 4)


def test_direction_vectors_resolve_sentinels():
    schedule = scan_schedule(DesignOption.from_tag("ODigDig"), Phase.SYNC, BS, UE)
    tx, rx = direction_vectors(schedule, beamspace_codebook(BS), beamspace_codebook(UE))
    assert tx.shape == (16, 64) and rx.shape == (16, 16)
    np.testing.assert_allclose(tx[:, 0], 1.0)
    np.testing.assert_allclose(rx, beamspace_codebook(UE).vectors)

    ra = scan_schedule(DesignOption.from_tag("DDO"), Phase.RA, BS, UE)
    with pytest.raises(ValueError):
        direction_vectors(ra, beamspace_codebook(UE), beamspace_codebook(BS))
