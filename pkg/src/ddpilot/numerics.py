"""Unitary DFT transforms, domain-tagged grids and steering vectors."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import fft as sfft_mod

if TYPE_CHECKING:
    from .waveform import FrameConfig


class Domain(enum.Enum):
    FREQ_TIME = "freq-time"
    DELAY_TIME = "delay-time"
    DELAY_DOPPLER = "delay-doppler"


class DomainError(ValueError):
    """Raised when a grid is handed to an operation defined on another domain."""


@dataclass(frozen=True)
class Grid:
    """An M x N complex frame tagged with the domain it lives in.

    Rows index subcarriers (frequency-time) or fast-time samples / delay bins,
    columns index OFDM symbols (slow time) or Doppler bins.
    """

    data: np.ndarray
    domain: Domain

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError(f"grid must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def require(self, domain: Domain) -> np.ndarray:
        if self.domain is not domain:
            raise DomainError(f"expected a {domain.value} grid, got {self.domain.value}")
        return self.data

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


def dft_matrix(size: int) -> np.ndarray:
    """Unitary DFT matrix with entries exp(-j2*pi*m*q/size)/sqrt(size)."""
    if size < 1:
        raise ValueError(f"DFT size must be >= 1, got {size}")
    idx = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / size) / np.sqrt(size)


# Column-wise (axis 0) and row-wise (axis 1) unitary transforms. Right
# multiplication by F_N acts on each row as a forward DFT along axis 1.

def fft_cols(a: np.ndarray) -> np.ndarray:
    """F_M @ a."""
    return sfft_mod.fft(a, axis=0, norm="ortho")


def ifft_cols(a: np.ndarray) -> np.ndarray:
    """F_M^H @ a."""
    return sfft_mod.ifft(a, axis=0, norm="ortho")


def fft_rows(a: np.ndarray) -> np.ndarray:
    """a @ F_N."""
    return sfft_mod.fft(a, axis=-1, norm="ortho")


def ifft_rows(a: np.ndarray) -> np.ndarray:
    """a @ F_N^H."""
    return sfft_mod.ifft(a, axis=-1, norm="ortho")


def delay_steering(tau: float, M: int, delta_f: float) -> np.ndarray:
    """b(tau)[q] = exp(-j2*pi*q*tau*delta_f)."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    return np.exp(-2j * np.pi * np.arange(M) * tau * delta_f)


def doppler_slow_steering(nu: float, N: int, frame: FrameConfig) -> np.ndarray:
    """c(nu)[n] = exp(j2*pi*nu*t_n), t_n the start of the n-th symbol."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    t_n = frame.T_cp + np.arange(N) * frame.T_sym
    return np.exp(2j * np.pi * nu * t_n)


def doppler_fast_steering(nu: float, M: int, T: float) -> np.ndarray:
    """c~(nu)[q] = exp(j2*pi*q*nu*T/M); the intra-symbol (ICI) phase drift."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    return np.exp(2j * np.pi * np.arange(M) * nu * T / M)


def isfft(grid: Grid) -> Grid:
    """Delay-Doppler -> frequency-time: F_M @ P @ F_N^H."""
    p = grid.require(Domain.DELAY_DOPPLER)
    return Grid(fft_cols(ifft_rows(p)), Domain.FREQ_TIME)


def sfft(grid: Grid) -> Grid:
    """Frequency-time -> delay-Doppler: F_M^H @ Y @ F_N."""
    y = grid.require(Domain.FREQ_TIME)
    return Grid(ifft_cols(fft_rows(y)), Domain.DELAY_DOPPLER)


def dd_from_delay_time(grid: Grid) -> Grid:
    """Delay-time -> delay-Doppler: R @ F_N."""
    r = grid.require(Domain.DELAY_TIME)
    return Grid(fft_rows(r), Domain.DELAY_DOPPLER)
