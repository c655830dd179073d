import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddpilot.numerics import (
    Domain,
    DomainError,
    Grid,
    dd_from_delay_time,
    delay_steering,
    dft_matrix,
    doppler_fast_steering,
    doppler_slow_steering,
    isfft,
    sfft,
)
from ddpilot.waveform import FrameConfig

from conftest import crandn


def explicit_dft(n):
    # textbook double loop, independent of the vectorised construction
    F = np.empty((n, n), dtype=complex)
    for m in range(n):
        for q in range(n):
            F[m, q] = np.exp(-2j * np.pi * m * q / n) / np.sqrt(n)
    return F


class TestGrid:
    def test_casts_to_complex(self):
        g = Grid(np.ones((2, 3)), Domain.FREQ_TIME)
        assert g.data.dtype == np.complex128
        assert g.shape == (2, 3)

    def test_rejects_non_matrix(self):
        with pytest.raises(ValueError):
            Grid(np.ones(4), Domain.FREQ_TIME)

    def test_domain_guard(self):
        g = Grid(np.zeros((2, 2)), Domain.DELAY_TIME)
        with pytest.raises(DomainError):
            isfft(g)
        with pytest.raises(DomainError):
            sfft(g)
        with pytest.raises(DomainError):
            dd_from_delay_time(Grid(np.zeros((2, 2)), Domain.FREQ_TIME))


class TestDft:
    def test_size_one(self):
        np.testing.assert_array_equal(dft_matrix(1), [[1]])

    def test_size_two(self):
        np.testing.assert_allclose(dft_matrix(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 128])
    def test_unitary(self, n):
        F = dft_matrix(n)
        assert np.linalg.norm(F @ F.conj().T - np.eye(n)) < 1e-12

    @pytest.mark.parametrize("n", [3, 8, 16])
    def test_matches_loop_oracle(self, n):
        np.testing.assert_allclose(dft_matrix(n), explicit_dft(n), atol=1e-13)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            dft_matrix(0)


class TestSteering:
    def test_delay_zero(self):
        np.testing.assert_array_equal(delay_steering(0.0, 16, 30e3), np.ones(16))

    def test_delay_one_bin(self):
        b = delay_steering(1 / (4 * 30e3), 4, 30e3)
        np.testing.assert_allclose(b, [1, -1j, -1, 1j], atol=1e-12)

    def test_delay_table_value(self):
        b = delay_steering(0.9e-6, 128, 30e3)
        assert b[1] == pytest.approx(np.exp(-2j * np.pi * 0.027), abs=1e-12)

    def test_slow_zero(self):
        np.testing.assert_array_equal(doppler_slow_steering(0.0, 8, FrameConfig(M=4, N=8)), np.ones(8))

    def test_slow_half_turn(self):
        frame = FrameConfig(M=4, N=2, T_cp=0.0)
        c = doppler_slow_steering(1 / (2 * frame.T_sym), 2, frame)
        np.testing.assert_allclose(c, [1, -1], atol=1e-12)

    def test_slow_one_bin_table(self, table1):
        assert table1.T_sym == pytest.approx(38.333e-6, rel=1e-4)
        assert table1.doppler_bin == pytest.approx(815.2, abs=0.05)
        c = doppler_slow_steering(table1.doppler_bin, table1.N, table1)
        expected = 2 * np.pi * table1.doppler_bin * (table1.T_cp + table1.T_sym)
        assert np.angle(c[1] * np.exp(-1j * expected)) == pytest.approx(0.0, abs=1e-12)

    def test_fast_zero(self):
        np.testing.assert_array_equal(doppler_fast_steering(0.0, 8, 1e-3), np.ones(8))

    def test_fast_alternates(self):
        M, T = 8, 1e-3
        ct = doppler_fast_steering(M / 2 / T, M, T)
        np.testing.assert_allclose(ct, (-1.0) ** np.arange(M), atol=1e-12)

    def test_fast_table_max_phase(self, table1):
        nu = 5466.0
        ct = doppler_fast_steering(nu, table1.M, table1.T)
        expected = 2 * np.pi * nu * table1.T * (table1.M - 1) / table1.M
        assert np.unwrap(np.angle(ct))[-1] == pytest.approx(expected, abs=1e-9)

    @given(
        tau=st.floats(0, 1e-5),
        nu=st.floats(-6e3, 6e3),
        M=st.integers(1, 64),
    )
    @settings(max_examples=50, deadline=None)
    def test_unit_modulus(self, tau, nu, M):
        frame = FrameConfig(M=M, N=8)
        b = delay_steering(tau, M, frame.delta_f)
        c = doppler_slow_steering(nu, 8, frame)
        ct = doppler_fast_steering(nu, M, frame.T)
        for v in (b, c, ct):
            np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)
        assert np.linalg.norm(b) ** 2 == pytest.approx(M, abs=1e-10)


class TestTransforms:
    def test_delta_is_flat(self):
        P = np.zeros((4, 2))
        P[0, 0] = 1
        X = isfft(Grid(P, Domain.DELAY_DOPPLER))
        assert X.domain is Domain.FREQ_TIME
        np.testing.assert_allclose(X.data, np.full((4, 2), 1 / np.sqrt(8)), atol=1e-15)

    def test_zero(self):
        Z = Grid(np.zeros((4, 2)), Domain.DELAY_DOPPLER)
        assert np.all(isfft(Z).data == 0)
        assert np.all(dd_from_delay_time(Grid(np.zeros((4, 2)), Domain.DELAY_TIME)).data == 0)

    @pytest.mark.parametrize("shape", [(1, 1), (4, 2), (8, 4), (16, 8), (128, 32)])
    def test_round_trip_and_norm(self, rng, shape):
        P = Grid(crandn(rng, *shape), Domain.DELAY_DOPPLER)
        X = isfft(P)
        back = sfft(X)
        assert back.domain is Domain.DELAY_DOPPLER
        assert np.linalg.norm(back.data - P.data) < 1e-12 * max(1.0, P.norm())
        assert X.norm() == pytest.approx(P.norm(), rel=1e-12)

    def test_isfft_matrix_oracle(self, rng):
        M, N = 8, 4
        P = crandn(rng, M, N)
        FM, FN = explicit_dft(M), explicit_dft(N)
        np.testing.assert_allclose(isfft(Grid(P, Domain.DELAY_DOPPLER)).data, FM @ P @ FN.conj().T, atol=1e-12)

    def test_dd_from_delay_time_oracle(self, rng):
        M, N = 8, 4
        R = crandn(rng, M, N)
        np.testing.assert_allclose(
            dd_from_delay_time(Grid(R, Domain.DELAY_TIME)).data, R @ explicit_dft(N), atol=1e-12
        )

    def test_two_dd_expressions_agree(self, rng):
        M, N = 16, 8
        Y = crandn(rng, M, N)
        R = explicit_dft(M).conj().T @ Y
        a = dd_from_delay_time(Grid(R, Domain.DELAY_TIME)).data
        b = sfft(Grid(Y, Domain.FREQ_TIME)).data
        assert np.linalg.norm(a - b) < 1e-12 * np.linalg.norm(Y)
