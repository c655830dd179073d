"""Detectors: single-tap MMSE, per-symbol full MMSE and the path-wise Landweber
(IMFC) equalizer, plus pilot removal and hard demapping."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .channel import ChannelFactors, Paths, tf_symbol_matrices
from .estimation import EstimatedChannel, EstimateKind
from .numerics import Domain, Grid, fft_cols
from .waveform import FrameConfig, SpPilotConfig, qam_demap

log = logging.getLogger(__name__)


class EqualizerKind(enum.Enum):
    SINGLE_TAP = "single-tap"
    FULL_MMSE = "full-mmse"
    IMFC = "imfc"


class StepSizeError(RuntimeError):
    """The Landweber iteration diverged; the step size is too large."""


@dataclass(frozen=True)
class EqualizerConfig:
    """``eta=None`` selects the step size by power iteration on the estimated operator.

    ``tol`` is the relative update size below which the Landweber loop exits
    early; 0 disables early exit.
    """

    kind: EqualizerKind = EqualizerKind.IMFC
    T_iters: int = 50
    eta: float | None = None
    snr_linear: float = np.inf
    tol: float = 1e-6

    def __post_init__(self):
        if self.kind is EqualizerKind.IMFC and self.T_iters < 1:
            raise ValueError(f"T_iters must be >= 1, got {self.T_iters}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.snr_linear <= 0:
            raise ValueError(f"snr_linear must be > 0, got {self.snr_linear}")


def _paths_of(est: EstimatedChannel | Paths) -> Paths:
    if isinstance(est, Paths):
        return est
    if est.kind is not EstimateKind.PARAMETRIC:
        raise ValueError("this equalizer needs a parametric channel estimate")
    return est.paths


def single_tap_mmse(Y: Grid, H_tf: np.ndarray, snr: float) -> Grid:
    """Per-RE MMSE: conj(H) Y / (|H|^2 + 1/SNR)."""
    y = Y.require(Domain.FREQ_TIME)
    H = np.asarray(H_tf)
    if H.shape != y.shape:
        raise ValueError(f"channel shape {H.shape} does not match frame {y.shape}")
    return Grid(np.conj(H) * y / (np.abs(H) ** 2 + 1.0 / snr), Domain.FREQ_TIME)


def full_mmse(
    R: Grid,
    est: EstimatedChannel | Paths,
    frame: FrameConfig,
    snr: float,
    diagnostics: dict | None = None,
) -> Grid:
    """ICI-aware per-symbol MMSE in the frequency domain.

    For each symbol, x_n = (H^H H + I/SNR)^{-1} H^H y_n with y_n = F_M r_n and
    H = F_M H_n F_M^H rebuilt from the path parameters. Pass a dict as
    ``diagnostics`` to receive the condition numbers of the normal matrices.
    """
    r = R.require(Domain.DELAY_TIME)
    paths = _paths_of(est)
    M, N = r.shape
    if paths.P == 0:
        return Grid(np.zeros((M, N), dtype=np.complex128), Domain.FREQ_TIME)
    H = tf_symbol_matrices(paths, frame)
    Hh = np.conj(np.swapaxes(H, -1, -2))
    y = fft_cols(r).T[:, :, None]  # (N, M, 1)
    gram = Hh @ H
    gram[:, np.arange(M), np.arange(M)] += 1.0 / snr
    x = np.linalg.solve(gram, Hh @ y)[:, :, 0].T
    if diagnostics is not None:
        diagnostics["cond"] = np.linalg.cond(gram)
    return Grid(x, Domain.FREQ_TIME)


def estimate_eta(est: EstimatedChannel | Paths, frame: FrameConfig, iters: int = 10, seed: int = 0) -> float:
    """Step size 1/lambda_max(H^H H) from a fixed-seed power iteration.

    The Rayleigh quotient never overestimates lambda_max, so the returned step
    errs large; it stays below the 2/lambda_max stability limit whenever the
    estimate is better than half the true value.
    """
    paths = _paths_of(est)
    op = ChannelFactors.build(paths, frame)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((frame.M, frame.N)) + 1j * rng.standard_normal((frame.M, frame.N))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        z = op.adjoint(op.forward(x))
        nz = np.linalg.norm(z)
        if nz == 0:
            break
        x = z / nz
    lam = float(np.linalg.norm(op.forward(x)) ** 2)
    if not lam > 0:
        raise ValueError("channel operator is zero; no step size exists")
    return 1.0 / lam


def imfc_landweber(
    R: Grid,
    est: EstimatedChannel | Paths,
    frame: FrameConfig,
    cfg: EqualizerConfig = EqualizerConfig(),
) -> Grid:
    """Landweber least-squares detection X <- X + eta * H^H(R - H(X)) from X = 0.

    The adjoint is evaluated path by path: fast-time phase removal in delay-time,
    a DFT to frequency-time, conjugate single-tap weighting, and MRC across paths.
    Iterations stop after ``cfg.T_iters`` or once the update is small relative
    to the estimate; the iteration count acts as the regularizer.
    """
    r = R.require(Domain.DELAY_TIME)
    paths = _paths_of(est)
    M, N = r.shape
    x = np.zeros((M, N), dtype=np.complex128)
    if paths.P == 0:
        return Grid(x, Domain.FREQ_TIME)
    eta = cfg.eta if cfg.eta is not None else estimate_eta(paths, frame)
    op = ChannelFactors.build(paths, frame)
    r_norm = np.linalg.norm(r)
    resid = r.copy()
    for t in range(cfg.T_iters):
        step = eta * op.adjoint(resid)
        x += step
        resid = r - op.forward(x)
        if np.linalg.norm(resid) > 10 * r_norm:
            raise StepSizeError(f"Landweber diverged at iteration {t + 1} with eta={eta:.4g}")
        if cfg.tol > 0 and np.linalg.norm(step) < cfg.tol * np.linalg.norm(x):
            log.debug("Landweber converged after %d iterations", t + 1)
            break
    return Grid(x, Domain.FREQ_TIME)


def remove_pilot_and_demap(X_hat: Grid, sp: SpPilotConfig, Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Strip the superimposed pilot and rescale to unit-energy data, then slice.

    Returns (D_hat, bits_hat); bits are read from D_hat in row-major order.
    """
    x = X_hat.require(Domain.FREQ_TIME)
    if sp.sigma_d == 0:
        raise ValueError("frame carries no data (sigma_d = 0)")
    M, N = x.shape
    D_hat = (x - sp.pilot_tf(M, N)) / sp.sigma_d
    return D_hat, qam_demap(D_hat, Q)
