"""Channel estimators: embedded-pilot LS with interpolation, the threshold method,
and the fractional delay-Doppler estimator with successive path cancellation."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import Paths, signed_bin
from .numerics import (
    Domain,
    Grid,
    delay_steering,
    doppler_fast_steering,
    doppler_slow_steering,
    fft_cols,
    fft_rows,
    ifft_cols,
    ifft_rows,
)
from .waveform import FrameConfig, SpPilotConfig


class EstimateKind(enum.Enum):
    PARAMETRIC = "parametric"
    GRID_TF = "grid-tf"


@dataclass(frozen=True)
class EstimatedChannel:
    """Either a parametric path list or a frequency-time grid, never both."""

    kind: EstimateKind
    paths: Paths | None = None
    H_tf: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is EstimateKind.PARAMETRIC and (self.paths is None or self.H_tf is not None):
            raise ValueError("a parametric estimate carries paths only")
        if self.kind is EstimateKind.GRID_TF and (self.H_tf is None or self.paths is not None):
            raise ValueError("a grid estimate carries H_tf only")

    @classmethod
    def parametric(cls, paths: Paths) -> EstimatedChannel:
        return cls(EstimateKind.PARAMETRIC, paths=paths)

    @classmethod
    def grid(cls, H_tf: np.ndarray) -> EstimatedChannel:
        return cls(EstimateKind.GRID_TF, H_tf=np.asarray(H_tf, dtype=np.complex128))

    @property
    def P_hat(self) -> int:
        return self.paths.P if self.paths is not None else 0


def _empty_paths() -> Paths:
    return Paths(np.zeros(0, complex), np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class CeConfig:
    """Settings for :func:`fractional_ce`.

    The loop stops, without keeping the candidate, once a candidate path would
    change the residual by less than ``epsilon`` times the per-bin RMS of Y_dd,
    ``||Y_dd||_F / sqrt(MN)``; with the default of 3 this mirrors the threshold
    method's 3-sigma detection floor without needing the noise variance.
    The refinement is a nested grid search; stage s+1 spans one grid step of
    stage s around its best point.
    """

    P_max: int = 8
    epsilon: float = 3.0
    refine_window: float = 0.5
    refine_stages: int = 2
    refine_points: int = 41

    def __post_init__(self):
        if self.P_max < 1:
            raise ValueError(f"P_max must be >= 1, got {self.P_max}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.refine_window <= 1:
            raise ValueError(f"refine_window must lie in (0, 1], got {self.refine_window}")
        if self.refine_stages < 1:
            raise ValueError(f"refine_stages must be >= 1, got {self.refine_stages}")
        if self.refine_points < 3 or self.refine_points % 2 == 0:
            raise ValueError(f"refine_points must be odd and >= 3, got {self.refine_points}")

    @property
    def resolution(self) -> float:
        """Grid step of the last refinement stage, in bins."""
        step = 2 * self.refine_window / (self.refine_points - 1)
        for _ in range(self.refine_stages - 1):
            step /= self.refine_points - 1
        return step


# -- embedded pilots ---------------------------------------------------------

def _interp_complex(x_new: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # np.interp holds the end values outside [x[0], x[-1]]
    return np.interp(x_new, x, y.real) + 1j * np.interp(x_new, x, y.imag)


def ep_estimate(Y: Grid, X: Grid, mask: np.ndarray) -> EstimatedChannel:
    """LS at the pilot lattice, then linear interpolation along frequency and
    afterwards along time. Outside the outermost pilots the edge value is held."""
    y = Y.require(Domain.FREQ_TIME)
    x = X.require(Domain.FREQ_TIME)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("pilot mask is empty")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if not mask[np.ix_(rows, cols)].all() or mask.sum() != rows.size * cols.size:
        raise ValueError("pilot mask must be a rectangular lattice")
    pilots = x[np.ix_(rows, cols)]
    if np.any(pilots == 0):
        raise ZeroDivisionError("zero-valued pilot symbol")
    h_p = y[np.ix_(rows, cols)] / pilots

    M, N = y.shape
    m_all = np.arange(M)
    h_f = np.empty((M, cols.size), dtype=np.complex128)
    for j in range(cols.size):
        h_f[:, j] = _interp_complex(m_all, rows, h_p[:, j])
    n_all = np.arange(N)
    H = np.empty((M, N), dtype=np.complex128)
    for m in range(M):
        H[m] = _interp_complex(n_all, cols, h_f[m])
    return EstimatedChannel.grid(H)


# -- threshold method --------------------------------------------------------

def tm_threshold(sigma2: float, sigma_d: float) -> float:
    return 3.0 * np.sqrt(sigma2 + sigma_d**2)


def tm_estimate(Y_dd: Grid, sp: SpPilotConfig, sigma2: float, frame: FrameConfig) -> EstimatedChannel:
    """Integer-grid peak detection around the pilot.

    Every delay-Doppler bin offset (l, k) from the pilot whose magnitude
    reaches 3*sqrt(sigma2 + sigma_d^2) becomes a path with gain Y_dd/sigma_p.
    """
    y = Y_dd.require(Domain.DELAY_DOPPLER)
    M, N = y.shape
    sp.check_frame(M, N)
    L = min(frame.max_delay_bin, M - 1)
    l = np.arange(L + 1)
    k = np.arange(N)
    window = y[np.ix_((sp.m_p + l) % M, (sp.n_p + k) % N)]
    hit_l, hit_k = np.nonzero(np.abs(window) >= tm_threshold(sigma2, sp.sigma_d))
    if hit_l.size == 0:
        return EstimatedChannel.parametric(_empty_paths())
    alpha = window[hit_l, hit_k] / sp.sigma_p
    tau = hit_l * frame.delay_bin
    nu = signed_bin(hit_k, N) * frame.doppler_bin
    order = np.lexsort((nu, tau))
    return EstimatedChannel.parametric(Paths(alpha[order], tau[order], nu[order]))


# -- fractional estimator ----------------------------------------------------

def build_A(tau: float, nu: float, sp: SpPilotConfig, frame: FrameConfig) -> Grid:
    """Delay-time response of a unit-gain path at (tau, nu) to the pilot alone.

    The pilot's ISFFT is the outer product f_{m_p} f_{n_p}^H, so the response
    factors into (c~ * F_M^H(f_mp * b)) (f_np^* * c)^T.
    """
    M, N = frame.M, frame.N
    sp.check_frame(M, N)
    return Grid(sp.sigma_p * np.outer(
        doppler_fast_steering(nu, M, frame.T) * _delay_template(sp.m_p, M, tau * frame.delta_f),
        _slow_template(sp.n_p, N, nu, frame),
    ), Domain.DELAY_TIME)


def _delay_template(m_p: int, M: int, tau_df) -> np.ndarray:
    """F_M^H (f_{m_p} * b(tau)); tau_df may be an array, giving one column each."""
    q = np.arange(M)[:, None]
    f_mp = np.exp(-2j * np.pi * q * m_p / M) / np.sqrt(M)
    b = np.exp(-2j * np.pi * q * np.atleast_1d(tau_df)[None, :])
    out = ifft_cols(f_mp * b)
    return out[:, 0] if np.ndim(tau_df) == 0 else out


def _slow_template(n_p: int, N: int, nu, frame: FrameConfig) -> np.ndarray:
    """f_{n_p}^* * c(nu); array nu gives one column each."""
    n = np.arange(N)[:, None]
    f_np_conj = np.exp(2j * np.pi * n * n_p / N) / np.sqrt(N)
    t_n = frame.T_cp + n * frame.T_sym
    c = np.exp(2j * np.pi * np.atleast_1d(nu)[None, :] * t_n)
    out = f_np_conj * c
    return out[:, 0] if np.ndim(nu) == 0 else out


def _doppler_template(n_p: int, N: int, nu, frame: FrameConfig) -> np.ndarray:
    """F_N (f_{n_p}^* * c(nu))."""
    return fft_cols(_slow_template(n_p, N, nu, frame))


def _grid_search(objective, center: float, cfg: CeConfig) -> float:
    """Maximize ``objective`` (vectorized over candidate offsets, in bins) on
    nested grids within center +/- refine_window. The first maximum wins, so
    ties go to the smaller value."""
    lo, hi = center - cfg.refine_window, center + cfg.refine_window
    half = cfg.refine_window
    best = center
    for _ in range(cfg.refine_stages):
        cand = np.linspace(best - half, best + half, cfg.refine_points)
        cand = cand[(cand >= lo - 1e-12) & (cand <= hi + 1e-12)]
        best = float(cand[np.argmax(objective(cand))])
        half = (2 * half / (cfg.refine_points - 1)) / 2
    return best


def fractional_ce(
    Y_dd: Grid,
    sp: SpPilotConfig,
    frame: FrameConfig,
    cfg: CeConfig = CeConfig(),
) -> EstimatedChannel:
    """Successive estimation of fractional (delay, Doppler, gain) triples.

    Per path: integer peak search on the residual around the pilot, delay
    refinement on the peak's Doppler column, Doppler refinement on the peak's
    delay row, LS gain against the pilot response, then cancellation of that
    response from the residual. Both refinements use the integer peak
    position of the other coordinate.
    """
    y = Y_dd.require(Domain.DELAY_DOPPLER)
    M, N = y.shape
    sp.check_frame(M, N)
    resid = y.copy()
    # noise-referenced floor: epsilon times the per-bin RMS of the observation
    stop = cfg.epsilon * np.linalg.norm(y) / np.sqrt(M * N)
    L = min(frame.max_delay_bin, M - 1)
    rows = (sp.m_p + np.arange(L + 1)) % M
    cols = (sp.n_p + np.arange(N)) % N
    alphas, taus, nus = [], [], []
    for _ in range(cfg.P_max):
        window = np.abs(resid[np.ix_(rows, cols)]) ** 2
        l_hat, k_idx = np.unravel_index(np.argmax(window), window.shape)
        k_hat = int(signed_bin(k_idx, N))

        u = resid[:, (sp.n_p + k_hat) % N]
        tau_bins = _grid_search(
            lambda d: np.abs(u.conj() @ _delay_template(sp.m_p, M, d / M)), float(l_hat), cfg
        )
        v = resid[(sp.m_p + l_hat) % M, :]
        nu_bins = _grid_search(
            lambda d: np.abs(v.conj() @ _doppler_template(sp.n_p, N, d * frame.doppler_bin, frame)),
            float(k_hat),
            cfg,
        )
        tau = tau_bins * frame.delay_bin
        nu = nu_bins * frame.doppler_bin

        A = build_A(tau, nu, sp, frame).data
        alpha = np.vdot(A, ifft_rows(resid)) / np.vdot(A, A).real
        update = alpha * fft_rows(A)
        if np.linalg.norm(update) < stop:
            break
        resid -= update
        alphas.append(alpha)
        taus.append(tau)
        nus.append(nu)
    return EstimatedChannel.parametric(Paths(alphas, taus, nus))


def reconstruct_tf(est: EstimatedChannel, frame: FrameConfig) -> np.ndarray:
    """Frequency-time channel sum_p alpha_p b(tau_p) c(nu_p)^T of a parametric estimate."""
    if est.kind is EstimateKind.GRID_TF:
        return est.H_tf
    H = np.zeros((frame.M, frame.N), dtype=np.complex128)
    for a, t, v in zip(est.paths.alpha, est.paths.tau, est.paths.nu):
        H += a * np.outer(delay_steering(t, frame.M, frame.delta_f), doppler_slow_steering(v, frame.N, frame))
    return H
