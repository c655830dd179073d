import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddpilot.numerics import Domain, Grid, sfft
from ddpilot.waveform import (
    EpPilotConfig,
    FrameConfig,
    SpPilotConfig,
    build_ep_grid,
    build_sp_grid,
    constellation,
    modulate,
    papr_db,
    papr_db_batch,
    qam_demap,
    qam_map,
    random_bits,
)

from conftest import crandn


class TestFrameConfig:
    def test_table_defaults(self, table1):
        assert (table1.M, table1.N, table1.delta_f, table1.T_cp, table1.f_c) == (128, 32, 30e3, 5e-6, 5.9e9)

    def test_derived_timing(self, table1):
        assert table1.T == pytest.approx(33.333e-6, rel=1e-4)
        assert table1.delay_bin == pytest.approx(1 / 3.84e6)
        # 5 us of CP over a 260 ns bin: 19.2 rounds up to 20
        assert table1.max_delay_bin == 20

    @pytest.mark.parametrize("kw", [{"M": 0}, {"N": 0}, {"delta_f": 0.0}, {"T_cp": -1e-6}, {"f_c": -1.0}])
    def test_rejects_bad_numerology(self, kw):
        with pytest.raises(ValueError):
            FrameConfig(**kw)


class TestQam:
    def test_qpsk_zero_bits(self):
        assert qam_map(np.array([0, 0]), 4)[0] == pytest.approx((1 + 1j) / np.sqrt(2))

    @pytest.mark.parametrize("Q", [4, 16])
    def test_unit_energy(self, Q):
        assert np.mean(np.abs(constellation(Q)) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_sixteen_min_distance(self):
        pts = constellation(16)
        d = np.abs(pts[:, None] - pts[None, :])
        d[np.eye(16, dtype=bool)] = np.inf
        assert d.min() == pytest.approx(2 / np.sqrt(10), abs=1e-12)

    @pytest.mark.parametrize("Q", [4, 16])
    def test_gray_neighbours_differ_by_one_bit(self, Q):
        pts = constellation(Q)
        dmin = 2 / np.sqrt(2 * (Q - 1) / 3)
        for i, j in itertools.combinations(range(Q), 2):
            if abs(abs(pts[i] - pts[j]) - dmin) < 1e-9:
                assert bin(i ^ j).count("1") == 1

    @given(st.sampled_from([4, 16]), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, Q, seed):
        bits = random_bits(np.random.default_rng(seed), 64 * int(np.log2(Q)))
        np.testing.assert_array_equal(qam_demap(qam_map(bits, Q), Q), bits)

    @pytest.mark.parametrize("Q", [4, 16])
    def test_small_noise_is_harmless(self, rng, Q):
        bits = random_bits(rng, 4000 * int(np.log2(Q)))
        s = qam_map(bits, Q)
        half = 1 / np.sqrt(2 * (Q - 1) / 3)
        noise = rng.uniform(0, 0.99 * half, s.size) * np.exp(2j * np.pi * rng.uniform(size=s.size))
        np.testing.assert_array_equal(qam_demap(s + noise, Q), bits)

    def test_midpoint_tie_goes_to_smallest_pattern(self):
        # 0 is equidistant from all four QPSK points
        np.testing.assert_array_equal(qam_demap(np.array([0j]), 4), [0, 0])
        # halfway between 01 (+1-1j) and 11 (-1-1j): smallest is 01
        np.testing.assert_array_equal(qam_demap(np.array([-1j / np.sqrt(2)]), 4), [0, 1])

    def test_shape_and_count_checks(self):
        assert qam_map(np.zeros(16, dtype=np.uint8), 4, (2, 4)).shape == (2, 4)
        with pytest.raises(ValueError):
            qam_map(np.zeros(3, dtype=np.uint8), 4)
        with pytest.raises(ValueError):
            qam_map(np.zeros(16, dtype=np.uint8), 4, (3, 3))
        with pytest.raises(ValueError):
            constellation(8)


class TestSpFrame:
    def test_pilot_only_delta(self):
        cfg = SpPilotConfig(0, 0, sigma_d=0.0, sigma_p=1.0)
        X = build_sp_grid(np.zeros((4, 2)), cfg)
        np.testing.assert_allclose(X.data, np.full((4, 2), 1 / np.sqrt(8)), atol=1e-15)

    def test_zero_data_gives_pilot(self):
        cfg = SpPilotConfig(1, 1, sigma_d=1.0, sigma_p=3.0)
        X = build_sp_grid(np.zeros((4, 2)), cfg)
        np.testing.assert_allclose(X.data, cfg.pilot_tf(4, 2), atol=1e-15)

    def test_pilot_power_must_be_positive(self):
        with pytest.raises(ValueError):
            SpPilotConfig(0, 0, sigma_d=1.0, sigma_p=0.0)
        with pytest.raises(ValueError):
            SpPilotConfig(0, 0, sigma_d=-1.0, sigma_p=1.0)

    def test_pdr(self):
        assert SpPilotConfig(0, 0, 2.0, 20.0).pdr == pytest.approx(100.0)

    def test_sfft_recovers_scaled_delta(self, rng):
        M, N = 16, 8
        cfg = SpPilotConfig(5, 3, sigma_d=0.0, sigma_p=7.0)
        P = sfft(build_sp_grid(crandn(rng, M, N), cfg)).data
        expected = np.zeros((M, N), complex)
        expected[5, 3] = 7.0
        assert np.abs(P - expected).max() < 1e-12

    def test_out_of_frame_pilot(self):
        with pytest.raises(ValueError):
            build_sp_grid(np.zeros((4, 2)), SpPilotConfig(4, 0, 1.0, 1.0))

    def test_average_power(self, rng, table1):
        # E||X||^2 = MN sigma_d^2 + sigma_p^2, i.e. sigma_d^2 (1 + beta/MN) per RE
        M, N = table1.M, table1.N
        sigma_d, beta = 1.3, 1000.0
        cfg = SpPilotConfig(M // 2, N // 2, sigma_d, np.sqrt(beta) * sigma_d)
        frames = 300
        power = np.mean([
            np.mean(np.abs(build_sp_grid(qam_map(random_bits(rng, 2 * M * N), 4, (M, N)), cfg).data) ** 2)
            for _ in range(frames)
        ])
        assert power == pytest.approx(sigma_d**2 * (1 + beta / (M * N)), rel=0.02)


class TestEpFrame:
    def test_degenerate_spacing(self):
        cfg = EpPilotConfig(K_f=8, K_t=4)
        mask = cfg.mask(8, 4)
        assert mask.sum() == 1 and mask[0, 0]

    def test_table_lattice(self, table1):
        cfg = EpPilotConfig()
        mask = cfg.mask(table1.M, table1.N)
        assert mask.sum() == 256
        assert mask.mean() == pytest.approx(cfg.density) == pytest.approx(1 / 16)

    def test_pilots_and_data_placed(self, rng):
        cfg = EpPilotConfig(K_f=2, K_t=2, pilot_value=1 - 1j)
        mask = cfg.mask(8, 4)
        data = crandn(rng, int((~mask).sum()))
        X, mask2 = build_ep_grid(data, cfg, 8, 4)
        np.testing.assert_array_equal(mask, mask2)
        assert np.all(X.data[mask] == 1 - 1j)
        np.testing.assert_array_equal(X.data[~mask], data)

    def test_wrong_data_count(self):
        with pytest.raises(ValueError):
            build_ep_grid(np.zeros(5), EpPilotConfig(), 8, 4)

    def test_spacing_validation(self):
        with pytest.raises(ValueError):
            EpPilotConfig(K_f=0)
        with pytest.raises(ValueError):
            EpPilotConfig(pilot_value=0)
        with pytest.raises(ValueError):
            EpPilotConfig(K_f=16).mask(8, 4)


class TestModulateAndPapr:
    def test_inverts_dft(self, rng):
        from ddpilot.numerics import dft_matrix

        A = crandn(rng, 8, 3)
        S = modulate(Grid(dft_matrix(8) @ A, Domain.FREQ_TIME))
        assert S.domain is Domain.DELAY_TIME
        np.testing.assert_allclose(S.data, A, atol=1e-12)

    def test_two_point(self):
        S = modulate(Grid(np.ones((2, 3)), Domain.FREQ_TIME))
        np.testing.assert_allclose(S.data, np.tile([[np.sqrt(2)], [0]], (1, 3)), atol=1e-15)
        assert papr_db(S) == pytest.approx(10 * np.log10(2), abs=1e-12)

    def test_norm_preserved(self, rng):
        X = Grid(crandn(rng, 16, 4), Domain.FREQ_TIME)
        assert modulate(X).norm() == pytest.approx(X.norm(), rel=1e-12)

    def test_single_subcarrier_is_flat(self):
        X = np.zeros((16, 4), complex)
        X[3] = 1.0
        assert papr_db(modulate(Grid(X, Domain.FREQ_TIME))) == pytest.approx(0.0, abs=1e-12)

    @given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
    @settings(max_examples=25, deadline=None)
    def test_scale_free(self, a):
        rng = np.random.default_rng(3)
        S = Grid(crandn(rng, 8, 4), Domain.DELAY_TIME)
        assert papr_db(Grid(a * S.data, Domain.DELAY_TIME)) == pytest.approx(papr_db(S), abs=1e-9)

    def test_batch_matches_single(self, rng):
        S = crandn(rng, 5, 8, 4)
        np.testing.assert_allclose(papr_db_batch(S), [papr_db(Grid(s, Domain.DELAY_TIME)) for s in S])

    def test_zero_signal(self):
        with pytest.raises(ValueError):
            papr_db(Grid(np.zeros((2, 2)), Domain.DELAY_TIME))
