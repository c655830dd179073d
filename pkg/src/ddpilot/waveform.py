"""Transmit side: OFDM numerology, QAM mapping, SP/EP frame builders, PAPR."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import Domain, Grid, fft_cols, ifft_cols, ifft_rows


@dataclass(frozen=True)
class FrameConfig:
    """OFDM numerology. Defaults are the paper-scale link (128 x 32, 30 kHz, 5.9 GHz)."""

    M: int = 128
    N: int = 32
    delta_f: float = 30e3
    T_cp: float = 5e-6
    f_c: float = 5.9e9

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be >= 1, got M={self.M}, N={self.N}")
        if self.delta_f <= 0:
            raise ValueError(f"delta_f must be > 0, got {self.delta_f}")
        if self.T_cp < 0:
            raise ValueError(f"T_cp must be >= 0, got {self.T_cp}")
        if self.f_c <= 0:
            raise ValueError(f"f_c must be > 0, got {self.f_c}")

    @property
    def T(self) -> float:
        """Useful symbol duration 1/delta_f."""
        return 1.0 / self.delta_f

    @property
    def T_sym(self) -> float:
        """Full symbol duration T' = T + T_cp."""
        return self.T + self.T_cp

    @property
    def sample_interval(self) -> float:
        return self.T / self.M

    @property
    def delay_bin(self) -> float:
        """Delay resolution 1/(M*delta_f) in seconds."""
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_bin(self) -> float:
        """Doppler resolution 1/(N*T') in Hz."""
        return 1.0 / (self.N * self.T_sym)

    @property
    def max_delay_bin(self) -> int:
        """Largest delay bin a CP-protected path can occupy."""
        return int(np.ceil(self.T_cp * self.M * self.delta_f - 1e-9))

    def t_n(self) -> np.ndarray:
        return self.T_cp + np.arange(self.N) * self.T_sym


@dataclass(frozen=True)
class SpPilotConfig:
    """Single delay-Doppler pilot superimposed on the data.

    sigma_d and sigma_p are amplitudes; the pilot-to-data ratio is
    sigma_p**2 / sigma_d**2.
    """

    m_p: int
    n_p: int
    sigma_d: float
    sigma_p: float

    def __post_init__(self):
        if self.sigma_d < 0:
            raise ValueError(f"sigma_d must be >= 0, got {self.sigma_d}")
        if self.sigma_p <= 0:
            raise ValueError(f"sigma_p must be > 0, got {self.sigma_p}")
        if self.m_p < 0 or self.n_p < 0:
            raise ValueError("pilot indices must be non-negative")

    @property
    def pdr(self) -> float:
        if self.sigma_d == 0:
            return float("inf")
        return self.sigma_p**2 / self.sigma_d**2

    def check_frame(self, M: int, N: int) -> None:
        if not (0 <= self.m_p < M and 0 <= self.n_p < N):
            raise ValueError(f"pilot ({self.m_p}, {self.n_p}) outside a {M}x{N} grid")

    def pilot_dd(self, M: int, N: int) -> Grid:
        """Unit delta at (m_p, n_p) in the delay-Doppler plane."""
        self.check_frame(M, N)
        p = np.zeros((M, N), dtype=np.complex128)
        p[self.m_p, self.n_p] = 1.0
        return Grid(p, Domain.DELAY_DOPPLER)

    def pilot_tf(self, M: int, N: int) -> np.ndarray:
        """sigma_p * ISFFT(P), the pilot's frequency-time footprint."""
        return self.sigma_p * fft_cols(ifft_rows(self.pilot_dd(M, N).data))


@dataclass(frozen=True)
class EpPilotConfig:
    """Embedded pilots on a regular lattice: every K_f-th subcarrier of every K_t-th symbol."""

    K_f: int = 4
    K_t: int = 4
    pilot_value: complex = 1 + 0j

    def __post_init__(self):
        if self.K_f < 1 or self.K_t < 1:
            raise ValueError(f"pilot spacings must be >= 1, got K_f={self.K_f}, K_t={self.K_t}")
        if self.pilot_value == 0:
            raise ValueError("pilot_value must be nonzero")

    def mask(self, M: int, N: int) -> np.ndarray:
        if self.K_f > M or self.K_t > N:
            raise ValueError(f"spacing ({self.K_f}, {self.K_t}) exceeds a {M}x{N} grid")
        m = np.zeros((M, N), dtype=bool)
        m[:: self.K_f, :: self.K_t] = True
        return m

    @property
    def density(self) -> float:
        return 1.0 / (self.K_f * self.K_t)


# -- QAM ---------------------------------------------------------------------
#
# Square Gray QAM, independent Gray code per axis. A symbol's bits are the
# in-phase bits followed by the quadrature bits, MSB first. Per-axis levels,
# indexed by Gray-decoded position, run from most positive to most negative:
#
#   Q=4   bit  0 -> +1, 1 -> -1                        (scaled by 1/sqrt(2))
#   Q=16  bits 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3  (scaled by 1/sqrt(10))
#
# so 00 maps to (1+1j)/sqrt(2) for Q=4 and 0000 to (3+3j)/sqrt(10) for Q=16.

SUPPORTED_Q = (4, 16)


def _check_q(Q: int) -> int:
    if Q not in SUPPORTED_Q:
        raise ValueError(f"unsupported modulation order Q={Q}; expected one of {SUPPORTED_Q}")
    return int(np.log2(Q))


@lru_cache(maxsize=None)
def constellation(Q: int) -> np.ndarray:
    """Unit-energy constellation; entry i is the symbol whose bit pattern reads i in binary."""
    k = _check_q(Q) // 2
    side = 2**k
    # gray-coded pattern g sits at level position gray_to_pos[g]
    gray_to_pos = np.empty(side, dtype=int)
    for pos in range(side):
        gray_to_pos[pos ^ (pos >> 1)] = pos
    levels = (side - 1) - 2 * gray_to_pos.astype(float)
    scale = np.sqrt(2 * (Q - 1) / 3)
    idx = np.arange(Q)
    i_bits, q_bits = idx >> k, idx & (side - 1)
    points = (levels[i_bits] + 1j * levels[q_bits]) / scale
    points.setflags(write=False)
    return points


def qam_map(bits: np.ndarray, Q: int, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Map a bit sequence to Gray QAM symbols.

    If ``shape`` is given the bit count must fill it exactly and the symbols
    are returned in that shape (row-major).
    """
    bps = _check_q(Q)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} is not a multiple of log2(Q)={bps}")
    n_sym = bits.size // bps
    if shape is not None and int(np.prod(shape)) != n_sym:
        raise ValueError(
            f"{bits.size} bits give {n_sym} symbols, target shape {shape} needs {int(np.prod(shape))}"
        )
    weights = 1 << np.arange(bps - 1, -1, -1)
    idx = bits.reshape(n_sym, bps) @ weights
    symbols = constellation(Q)[idx]
    return symbols.reshape(shape) if shape is not None else symbols


def qam_demap(symbols: np.ndarray, Q: int) -> np.ndarray:
    """Minimum-distance hard decision back to bits.

    Exact ties resolve toward the numerically smallest bit pattern.
    """
    bps = _check_q(Q)
    points = constellation(Q)
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    d = np.abs(s[:, None] - points[None, :]) ** 2
    near = d <= d.min(axis=1, keepdims=True) + 1e-12
    idx = np.argmax(near, axis=1)
    shifts = np.arange(bps - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


# -- frame builders ----------------------------------------------------------

def build_sp_grid(D: np.ndarray, cfg: SpPilotConfig) -> Grid:
    """X = sigma_d * D + sigma_p * ISFFT(P)."""
    D = np.asarray(D, dtype=np.complex128)
    M, N = D.shape
    cfg.check_frame(M, N)
    return Grid(cfg.sigma_d * D + cfg.pilot_tf(M, N), Domain.FREQ_TIME)


def build_ep_grid(
    data: np.ndarray, cfg: EpPilotConfig, M: int, N: int
) -> tuple[Grid, np.ndarray]:
    """Place pilots on the lattice and data symbols, in row-major order, elsewhere."""
    mask = cfg.mask(M, N)
    data = np.asarray(data, dtype=np.complex128).ravel()
    n_data = M * N - int(mask.sum())
    if data.size != n_data:
        raise ValueError(f"EP frame needs {n_data} data symbols, got {data.size}")
    x = np.empty((M, N), dtype=np.complex128)
    x[mask] = cfg.pilot_value
    x[~mask] = data
    return Grid(x, Domain.FREQ_TIME), mask


def modulate(X: Grid) -> Grid:
    """OFDM modulation S = F_M^H X (one IDFT per symbol, no CP)."""
    return Grid(ifft_cols(X.require(Domain.FREQ_TIME)), Domain.DELAY_TIME)


def papr_db(S: Grid) -> float:
    """Peak-to-average power ratio of a time-domain frame, in dB."""
    s = S.require(Domain.DELAY_TIME)
    power = np.abs(s) ** 2
    mean = power.mean()
    if mean == 0:
        raise ValueError("PAPR is undefined for an all-zero signal")
    return float(10 * np.log10(power.max() / mean))


def papr_db_batch(S: np.ndarray) -> np.ndarray:
    """PAPR of a stack of time-domain frames with shape (..., M, N)."""
    power = np.abs(S) ** 2
    peak = power.max(axis=(-2, -1))
    mean = power.mean(axis=(-2, -1))
    return 10 * np.log10(peak / mean)
