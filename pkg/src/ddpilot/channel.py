"""Doubly-dispersive P-path channel: realizations, ICI-aware operator and adjoint, noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .numerics import (
    Domain,
    Grid,
    delay_steering,
    dft_matrix,
    doppler_fast_steering,
    doppler_slow_steering,
    fft_cols,
    ifft_cols,
)
from .waveform import FrameConfig

SPEED_OF_LIGHT = 299_792_458.0

# Table I delay profile, seconds.
TABLE_I_DELAYS = (0.0, 0.9e-6, 2.7e-6, 4.0e-6)


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Paths:
    """Parametric path set: complex gains, delays [s] and Doppler shifts [Hz].

    No power normalization is imposed, so estimates and test fixtures use this
    directly; :class:`ChannelRealization` adds the physical invariants.
    """

    alpha: np.ndarray
    tau: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=np.complex128))
        t = np.atleast_1d(np.asarray(self.tau, dtype=float))
        v = np.atleast_1d(np.asarray(self.nu, dtype=float))
        if not (a.shape == t.shape == v.shape) or a.ndim != 1:
            raise ValueError(f"path arrays disagree: {a.shape}, {t.shape}, {v.shape}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "tau", t)
        object.__setattr__(self, "nu", v)

    @property
    def P(self) -> int:
        return self.alpha.size

    @classmethod
    def single(cls, alpha: complex = 1.0, tau: float = 0.0, nu: float = 0.0) -> Paths:
        return cls([alpha], [tau], [nu])


@dataclass(frozen=True)
class ChannelRealization(Paths):
    """A drawn channel: at least one path, unit total power, delays ascending."""

    def __post_init__(self):
        super().__post_init__()
        if self.P < 1:
            raise ValueError("a channel needs at least one path")
        power = float(np.sum(np.abs(self.alpha) ** 2))
        if abs(power - 1.0) > 1e-12:
            raise ValueError(f"path gains must have unit total power, got {power}")
        if np.any(np.diff(self.tau) < 0):
            raise ValueError("path delays must be sorted ascending")


@dataclass(frozen=True)
class NoiseConfig:
    sigma2: float = 1.0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


def max_doppler(frame: FrameConfig, v_max_kmh: float) -> float:
    return frame.f_c * (v_max_kmh / 3.6) / SPEED_OF_LIGHT


def draw_channel(
    frame: FrameConfig,
    v_max_kmh: float,
    rng: np.random.Generator | int | None,
    delays: tuple[float, ...] = TABLE_I_DELAYS,
) -> ChannelRealization:
    """Draw a Table I channel: fixed delays, equal-power gains with uniform phases,
    Doppler f_c * v/c * cos(theta) with theta ~ U[0, 2*pi)."""
    if v_max_kmh < 0:
        raise ChannelConfigError(f"v_max must be >= 0, got {v_max_kmh}")
    if max(delays) > frame.T_cp:
        raise ChannelConfigError(
            f"max path delay {max(delays):.3g} s exceeds the cyclic prefix T_cp={frame.T_cp:.3g} s"
        )
    rng = np.random.default_rng(rng)
    P = len(delays)
    phases = rng.uniform(0.0, 2 * np.pi, size=P)
    alpha = np.exp(1j * phases) / np.sqrt(P)
    alpha /= np.linalg.norm(alpha)
    theta = rng.uniform(0.0, 2 * np.pi, size=P)
    nu = max_doppler(frame, v_max_kmh) * np.cos(theta)
    return ChannelRealization(alpha, np.array(delays, dtype=float), nu)


def signed_bin(k: np.ndarray | int, N: int) -> np.ndarray:
    """Map cyclic Doppler indices onto [-floor(N/2), ceil(N/2))."""
    h = N // 2
    return (np.asarray(k) + h) % N - h


def quantize_integer(ch: Paths, frame: FrameConfig) -> Paths:
    """Round delays and Doppler shifts to the nearest grid bin; gains are kept."""
    l = np.floor(ch.tau / frame.delay_bin + 0.5)
    k = signed_bin(np.floor(ch.nu / frame.doppler_bin + 0.5).astype(int), frame.N)
    return type(ch)(ch.alpha.copy(), l * frame.delay_bin, k * frame.doppler_bin)


# -- operator ----------------------------------------------------------------

@dataclass(frozen=True)
class ChannelFactors:
    """Per-path factors of the channel operator, precomputed once per frame.

    ``htf[p]`` is the M x N frequency-time matrix b(tau_p) c(nu_p)^T and
    ``ici[p]`` the length-M fast-time phase c~(nu_p).
    """

    alpha: np.ndarray
    htf: np.ndarray = field(repr=False)
    ici: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, ch: Paths, frame: FrameConfig, ici: bool = True) -> ChannelFactors:
        M, N = frame.M, frame.N
        htf = np.empty((ch.P, M, N), dtype=np.complex128)
        fast = np.ones((ch.P, M), dtype=np.complex128)
        for p in range(ch.P):
            b = delay_steering(ch.tau[p], M, frame.delta_f)
            c = doppler_slow_steering(ch.nu[p], N, frame)
            htf[p] = np.outer(b, c)
            if ici:
                fast[p] = doppler_fast_steering(ch.nu[p], M, frame.T)
        return cls(ch.alpha.copy(), htf, fast)

    @property
    def P(self) -> int:
        return self.alpha.size

    def forward(self, x: np.ndarray) -> np.ndarray:
        """H(X) = sum_p alpha_p * [F_M^H (X * Htf_p)] * Hici_p."""
        z = ifft_cols_batched(x[None, :, :] * self.htf)
        z *= (self.alpha[:, None] * self.ici)[:, :, None]
        return z.sum(axis=0)

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        """H^H(R) = sum_p conj(alpha_p) * [F_M (R * conj(Hici_p))] * conj(Htf_p)."""
        z = r[None, :, :] * np.conj(self.ici)[:, :, None]
        z = fft_cols_batched(z)
        z *= np.conj(self.htf)
        z *= np.conj(self.alpha)[:, None, None]
        return z.sum(axis=0)

    def tf_channel(self) -> np.ndarray:
        """ICI-free frequency-time channel sum_p alpha_p b c^T."""
        return np.tensordot(self.alpha, self.htf, axes=1)


def fft_cols_batched(a: np.ndarray) -> np.ndarray:
    return fft.fft(a, axis=-2, norm="ortho")


def ifft_cols_batched(a: np.ndarray) -> np.ndarray:
    return fft.ifft(a, axis=-2, norm="ortho")


def _check_paths(ch: Paths) -> None:
    if ch.P < 1:
        raise ValueError("channel has no paths")


def apply_channel(X: Grid, ch: Paths, frame: FrameConfig) -> Grid:
    """Noiseless ICI-aware propagation of a frequency-time frame to delay-time samples."""
    x = X.require(Domain.FREQ_TIME)
    _check_paths(ch)
    return Grid(ChannelFactors.build(ch, frame).forward(x), Domain.DELAY_TIME)


def channel_adjoint(R: Grid, ch: Paths, frame: FrameConfig) -> Grid:
    """Adjoint of :func:`apply_channel` under the Frobenius inner product."""
    r = R.require(Domain.DELAY_TIME)
    _check_paths(ch)
    return Grid(ChannelFactors.build(ch, frame).adjoint(r), Domain.FREQ_TIME)


def tf_channel(ch: Paths, frame: FrameConfig) -> np.ndarray:
    """H_tf = sum_p alpha_p b(tau_p) c(nu_p)^T."""
    return ChannelFactors.build(ch, frame, ici=False).tf_channel()


def apply_channel_ici_free(X: Grid, ch: Paths, frame: FrameConfig) -> Grid:
    x = X.require(Domain.FREQ_TIME)
    return Grid(tf_channel(ch, frame) * x, Domain.FREQ_TIME)


def per_symbol_channel_matrix(ch: Paths, frame: FrameConfig, n: int) -> np.ndarray:
    """Delay-time M x M matrix H_n acting on the n-th transmitted symbol s_n."""
    if not 0 <= n < frame.N:
        raise IndexError(f"symbol index {n} outside [0, {frame.N})")
    M = frame.M
    F = dft_matrix(M)
    t_n = frame.T_cp + n * frame.T_sym
    H = np.zeros((M, M), dtype=np.complex128)
    for p in range(ch.P):
        gain = ch.alpha[p] * np.exp(2j * np.pi * ch.nu[p] * t_n)
        b = delay_steering(ch.tau[p], M, frame.delta_f)
        ct = doppler_fast_steering(ch.nu[p], M, frame.T)
        H += gain * (ct[:, None] * (F.conj().T @ (b[:, None] * F)))
    return H


def tf_symbol_matrices(ch: Paths, frame: FrameConfig) -> np.ndarray:
    """Stack of frequency-domain channel matrices F_M H_n F_M^H, shape (N, M, M).

    Each path contributes (F C~ F^H) diag(b) scaled by its slow-time gain, so
    the circulant ICI factor is built once per path.
    """
    M, N = frame.M, frame.N
    out = np.zeros((N, M, M), dtype=np.complex128)
    t_n = frame.t_n()
    for p in range(ch.P):
        ct = doppler_fast_steering(ch.nu[p], M, frame.T)
        ici_tf = fft_cols(ct[:, None] * ifft_cols(np.eye(M)))  # F diag(ct) F^H
        b = delay_steering(ch.tau[p], M, frame.delta_f)
        base = ici_tf * b[None, :]
        gains = ch.alpha[p] * np.exp(2j * np.pi * ch.nu[p] * t_n)
        out += gains[:, None, None] * base[None, :, :]
    return out


def add_noise(R: Grid, noise: NoiseConfig | float, rng: np.random.Generator | int | None) -> Grid:
    """Add circular complex Gaussian noise of variance sigma2 per entry."""
    sigma2 = noise.sigma2 if isinstance(noise, NoiseConfig) else float(noise)
    if sigma2 == 0:
        return R
    rng = np.random.default_rng(rng)
    shape = R.shape
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return Grid(R.data + np.sqrt(sigma2 / 2) * w, R.domain)


def sigma_from_snr(snr_db: float, pdr_db: float, frame: FrameConfig, sigma2: float = 1.0):
    """Data/pilot amplitudes hitting a target SNR with noise variance ``sigma2``.

    SNR = sigma_d^2 (1 + beta/(MN)) / sigma2 with beta the pilot-to-data ratio.
    Returns (sigma_d, sigma_p, sigma2).
    """
    snr = 10 ** (snr_db / 10)
    beta = 10 ** (pdr_db / 10)
    sigma_d2 = snr * sigma2 / (1 + beta / (frame.M * frame.N))
    return float(np.sqrt(sigma_d2)), float(np.sqrt(beta * sigma_d2)), float(sigma2)
