"""Monte Carlo orchestration: receiver pipelines, seeded trials and sweeps."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .channel import (
    TABLE_I_DELAYS,
    ChannelConfigError,
    Paths,
    add_noise,
    apply_channel,
    draw_channel,
    quantize_integer,
    sigma_from_snr,
    tf_channel,
)
from .equalization import (
    EqualizerConfig,
    EqualizerKind,
    full_mmse,
    imfc_landweber,
    remove_pilot_and_demap,
    single_tap_mmse,
)
from .estimation import CeConfig, EstimatedChannel, ep_estimate, fractional_ce, reconstruct_tf, tm_estimate
from .metrics import NMSE_FLOOR_DB, MetricsRecord, ber, data_density, effective_throughput, nmse_db
from .numerics import Domain, Grid, dd_from_delay_time, fft_cols, ifft_rows
from .waveform import (
    EpPilotConfig,
    FrameConfig,
    SpPilotConfig,
    build_ep_grid,
    build_sp_grid,
    modulate,
    papr_db,
    papr_db_batch,
    qam_demap,
    qam_map,
    random_bits,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReceiverPipeline:
    id: str
    estimator: str  # "TM", "PropCE", "PerfCSI" or "EP"
    equalizer: EqualizerKind

    @property
    def scheme(self) -> str:
        return "EP" if self.estimator == "EP" else "SP"


PIPELINES = {
    p.id: p
    for p in (
        ReceiverPipeline("TM+FullMMSE", "TM", EqualizerKind.FULL_MMSE),
        ReceiverPipeline("PropCE+FullMMSE", "PropCE", EqualizerKind.FULL_MMSE),
        ReceiverPipeline("PerfCSI+FullMMSE", "PerfCSI", EqualizerKind.FULL_MMSE),
        ReceiverPipeline("TM+SingleTap", "TM", EqualizerKind.SINGLE_TAP),
        ReceiverPipeline("EP+SingleTap", "EP", EqualizerKind.SINGLE_TAP),
        ReceiverPipeline("PropCE+IMFC", "PropCE", EqualizerKind.IMFC),
    )
}

CHANNEL_KINDS = ("fractional", "integer")
MODES = ("link", "papr")
DEFAULT_SPEEDS = (0.0, 100.0, 250.0, 500.0, 750.0, 1000.0)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A full sweep description.

    In ``link`` mode each point runs ``trials`` end-to-end frames through every
    pipeline. In ``papr`` mode only transmit frames are generated; ``trials``
    is the number of frames per PDR point and one SP and one EP record is
    produced per point.
    """

    frame: FrameConfig = field(default_factory=FrameConfig)
    pipelines: tuple[str, ...] = tuple(PIPELINES)
    Q: tuple[int, ...] = (4,)
    snr_db: tuple[float, ...] = (15.0,)
    pdr_db: tuple[float, ...] = (30.0,)
    v_max_kmh: tuple[float, ...] = (1000.0,)
    channel: str = "fractional"
    trials: int = 200
    base_seed: int = 0
    mode: str = "link"
    delays: tuple[float, ...] = TABLE_I_DELAYS
    m_p: int | None = None
    n_p: int | None = None
    ep: EpPilotConfig = field(default_factory=EpPilotConfig)
    ce: CeConfig = field(default_factory=CeConfig)
    imfc_iters: int = 50
    imfc_eta: float | None = None
    imfc_tol: float = 1e-6

    def __post_init__(self):
        for key in ("pipelines", "Q", "snr_db", "pdr_db", "v_max_kmh", "delays"):
            value = tuple(getattr(self, key))
            if not value:
                raise ConfigError(f"{key}: sweep list must be nonempty")
            object.__setattr__(self, key, value)
        for name in self.pipelines:
            if name not in PIPELINES:
                raise ConfigError(f"pipelines: unknown pipeline {name!r}; choose from {sorted(PIPELINES)}")
        for q in self.Q:
            if q not in (4, 16):
                raise ConfigError(f"Q: modulation order must be 4 or 16, got {q}")
        if any(v < 0 for v in self.v_max_kmh):
            raise ConfigError("v_max_kmh: speeds must be >= 0")
        if self.channel not in CHANNEL_KINDS:
            raise ConfigError(f"channel: must be one of {CHANNEL_KINDS}, got {self.channel!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed: must be an unsigned 64-bit integer")
        if max(self.delays) > self.frame.T_cp:
            raise ConfigError(
                f"frame.T_cp: cyclic prefix {self.frame.T_cp:g} s is shorter than the "
                f"largest path delay {max(self.delays):g} s"
            )
        if min(self.delays) < 0:
            raise ConfigError("delays: path delays must be >= 0")
        if self.imfc_iters < 1:
            raise ConfigError("equalizer.T_iters: must be >= 1")
        if self.imfc_eta is not None and self.imfc_eta <= 0:
            raise ConfigError("equalizer.eta: must be > 0 or auto")
        if not (0 <= self.pilot_m_p < self.frame.M and 0 <= self.pilot_n_p < self.frame.N):
            raise ConfigError(f"pilot: position ({self.pilot_m_p}, {self.pilot_n_p}) is outside the frame")
        if self.ep.K_f > self.frame.M or self.ep.K_t > self.frame.N:
            raise ConfigError("ep: pilot spacing exceeds the frame")

    @property
    def pilot_m_p(self) -> int:
        # grid centre by default
        return self.frame.M // 2 if self.m_p is None else self.m_p

    @property
    def pilot_n_p(self) -> int:
        return self.frame.N // 2 if self.n_p is None else self.n_p

    def points(self) -> list[SweepPoint]:
        return [
            SweepPoint(q, s, p, v)
            for q, s, p, v in itertools.product(self.Q, self.snr_db, self.pdr_db, self.v_max_kmh)
        ]


@dataclass(frozen=True)
class SweepPoint:
    Q: int
    snr_db: float
    pdr_db: float
    v_max_kmh: float


@dataclass(frozen=True)
class TrialOutcome:
    ber: float
    eff_throughput: float
    nmse_db: float
    papr_db: float


# -- seeding -----------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, point_index: int, trial_index: int) -> int:
    """64-bit seed of one trial: splitmix64 chained over (base, point, trial).

    Every trial owns an independent generator, so results do not depend on
    the order or the process in which trials run.
    """
    return _splitmix64(_splitmix64(_splitmix64(base_seed) ^ point_index) ^ trial_index)


# -- one trial ---------------------------------------------------------------

def _sp_estimate(kind: str, Ydd: Grid, sp: SpPilotConfig, ch: Paths, cfg: ExperimentConfig, sigma2: float):
    if kind == "PerfCSI":
        return EstimatedChannel.parametric(ch)
    if kind == "TM":
        return tm_estimate(Ydd, sp, sigma2, cfg.frame)
    return fractional_ce(Ydd, sp, cfg.frame, cfg.ce)


def run_trial(cfg: ExperimentConfig, point_index: int, trial: int) -> dict[str, TrialOutcome]:
    """Run one frame end to end through every configured pipeline.

    All SP pipelines see the same transmitted frame, channel and noise; the EP
    pipeline sees the same channel with its own frame and noise. The channel
    always includes ICI; only the receivers differ in what they model.
    """
    point = cfg.points()[point_index]
    frame = cfg.frame
    M, N = frame.M, frame.N
    rng = np.random.default_rng(trial_seed(cfg.base_seed, point_index, trial))
    Q = point.Q
    bps = int(np.log2(Q))
    snr = 10 ** (point.snr_db / 10)

    try:
        ch = draw_channel(frame, point.v_max_kmh, rng, cfg.delays)
    except ChannelConfigError as exc:
        raise ConfigError(f"point {point}: {exc}") from exc
    if cfg.channel == "integer":
        ch = quantize_integer(ch, frame)
    H_true = tf_channel(ch, frame)

    pipelines = [PIPELINES[name] for name in cfg.pipelines]
    out: dict[str, TrialOutcome] = {}

    sp_pipes = [p for p in pipelines if p.scheme == "SP"]
    if sp_pipes:
        sigma_d, sigma_p, sigma2 = sigma_from_snr(point.snr_db, point.pdr_db, frame)
        sp = SpPilotConfig(cfg.pilot_m_p, cfg.pilot_n_p, sigma_d, sigma_p)
        bits = random_bits(rng, M * N * bps)
        X = build_sp_grid(qam_map(bits, Q, (M, N)), sp)
        R = add_noise(apply_channel(X, ch, frame), sigma2, rng)
        Ydd = dd_from_delay_time(R)
        Y = Grid(fft_cols(R.data), Domain.FREQ_TIME)
        frame_papr = papr_db(modulate(X))
        estimates: dict[str, tuple[EstimatedChannel, float]] = {}
        for pipe in sp_pipes:
            if pipe.estimator not in estimates:
                est = _sp_estimate(pipe.estimator, Ydd, sp, ch, cfg, sigma2)
                err = NMSE_FLOOR_DB if pipe.estimator == "PerfCSI" else nmse_db(reconstruct_tf(est, frame), H_true)
                estimates[pipe.estimator] = (est, err)
            est, err = estimates[pipe.estimator]
            if pipe.equalizer is EqualizerKind.SINGLE_TAP:
                X_hat = single_tap_mmse(Y, reconstruct_tf(est, frame), snr)
            elif pipe.equalizer is EqualizerKind.FULL_MMSE:
                X_hat = full_mmse(R, est, frame, snr)
            else:
                eq = EqualizerConfig(
                    EqualizerKind.IMFC, cfg.imfc_iters, cfg.imfc_eta, snr, cfg.imfc_tol
                )
                X_hat = imfc_landweber(R, est, frame, eq)
            _, bits_hat = remove_pilot_and_demap(X_hat, sp, Q)
            b = ber(bits, bits_hat)
            out[pipe.id] = TrialOutcome(b, effective_throughput(b, 1.0, Q), err, frame_papr)

    if any(p.scheme == "EP" for p in pipelines):
        # every RE, pilots included, carries unit-energy symbols scaled to the target SNR
        amp = np.sqrt(snr)
        mask = cfg.ep.mask(M, N)
        n_data = M * N - int(mask.sum())
        bits = random_bits(rng, n_data * bps)
        X_unit, mask = build_ep_grid(qam_map(bits, Q), cfg.ep, M, N)
        X = Grid(amp * X_unit.data, Domain.FREQ_TIME)
        R = add_noise(apply_channel(X, ch, frame), 1.0, rng)
        Y = Grid(fft_cols(R.data), Domain.FREQ_TIME)
        est = ep_estimate(Y, X, mask)
        X_hat = single_tap_mmse(Y, est.H_tf, snr).data / amp
        bits_hat = qam_demap(X_hat[~mask], Q)
        b = ber(bits, bits_hat)
        dens = data_density("EP", cfg.ep)
        out["EP+SingleTap"] = TrialOutcome(
            b, effective_throughput(b, dens, Q), nmse_db(est.H_tf, H_true), papr_db(modulate(X))
        )
    return out


# -- PAPR-only frames --------------------------------------------------------

def papr_frames(
    frame: FrameConfig,
    pdr_db: float | None,
    n_frames: int,
    rng: np.random.Generator,
    Q: int = 4,
    ep: EpPilotConfig | None = None,
    m_p: int | None = None,
    n_p: int | None = None,
    chunk: int = 500,
) -> np.ndarray:
    """Per-frame PAPR [dB] of random SP frames at ``pdr_db`` or, with
    ``pdr_db=None``, of EP frames. PAPR is scale-free so SNR plays no role."""
    M, N = frame.M, frame.N
    m_p = M // 2 if m_p is None else m_p
    n_p = N // 2 if n_p is None else n_p
    bps = int(np.log2(Q))
    out = np.empty(n_frames)
    if pdr_db is not None:
        beta = 10 ** (pdr_db / 10)
        pilot = np.zeros((M, N), dtype=np.complex128)
        pilot[m_p, n_p] = np.sqrt(beta)
        pilot_tf = fft_cols(ifft_rows(pilot))
    else:
        ep = ep or EpPilotConfig()
        mask = ep.mask(M, N)
    for start in range(0, n_frames, chunk):
        k = min(chunk, n_frames - start)
        if pdr_db is not None:
            D = qam_map(random_bits(rng, k * M * N * bps), Q, (k, M, N))
            X = D + pilot_tf
        else:
            X = np.empty((k, M, N), dtype=np.complex128)
            X[:, mask] = ep.pilot_value
            X[:, ~mask] = qam_map(random_bits(rng, k * int((~mask).sum()) * bps), Q, (k, int((~mask).sum())))
        S = ifft_cols_stack(X)
        out[start : start + k] = papr_db_batch(S)
    return out


def ifft_cols_stack(X: np.ndarray) -> np.ndarray:
    return fft.ifft(X, axis=-2, norm="ortho")


# -- sweeps ------------------------------------------------------------------

def _aggregate(pipe: str, point: SweepPoint, cfg: ExperimentConfig, outcomes: list[TrialOutcome]) -> MetricsRecord:
    bers = np.array([o.ber for o in outcomes])
    papr = np.array([o.papr_db for o in outcomes])
    return MetricsRecord(
        scheme=pipe,
        Q=point.Q,
        snr_db=float(point.snr_db),
        pdr_db=float(point.pdr_db),
        v_max_kmh=float(point.v_max_kmh),
        channel_kind=cfg.channel,
        trials=len(outcomes),
        ber=float(bers.mean()),
        eff_throughput=float(np.mean([o.eff_throughput for o in outcomes])),
        nmse_db=float(np.median([o.nmse_db for o in outcomes])),
        papr_db=float(np.median(papr)),
        papr_p99_db=float(np.percentile(papr, 99)),
    )


def _trial_task(args):
    cfg, point_index, trial = args
    return run_trial(cfg, point_index, trial)


def _papr_task(args):
    cfg, point_index = args
    point = cfg.points()[point_index]
    rng_sp = np.random.default_rng(trial_seed(cfg.base_seed, point_index, 0))
    rng_ep = np.random.default_rng(trial_seed(cfg.base_seed, point_index, 1))
    kw = dict(Q=point.Q, ep=cfg.ep, m_p=cfg.pilot_m_p, n_p=cfg.pilot_n_p)
    sp = papr_frames(cfg.frame, point.pdr_db, cfg.trials, rng_sp, **kw)
    ep = papr_frames(cfg.frame, None, cfg.trials, rng_ep, **kw)
    return sp, ep


def _papr_record(scheme: str, point: SweepPoint, cfg: ExperimentConfig, values: np.ndarray) -> MetricsRecord:
    nan = float("nan")
    return MetricsRecord(
        scheme=scheme,
        Q=point.Q,
        snr_db=float(point.snr_db),
        pdr_db=float(point.pdr_db),
        v_max_kmh=float(point.v_max_kmh),
        channel_kind=cfg.channel,
        trials=int(values.size),
        ber=nan,
        eff_throughput=nan,
        nmse_db=nan,
        papr_db=float(values.mean()),
        papr_p99_db=float(np.percentile(values, 99)),
    )


def _map(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[MetricsRecord]:
    """Run the Cartesian product of sweep axes; one record per (point, pipeline).

    Records come out ordered by point (Q, SNR, PDR, speed, in that nesting)
    and then by the configured pipeline order, independent of ``threads``.
    """
    points = cfg.points()
    records: list[MetricsRecord] = []
    if cfg.mode == "papr":
        results = _map(_papr_task, [(cfg, i) for i in range(len(points))], threads)
        for point, (sp, ep) in zip(points, results):
            records.append(_papr_record("SP", point, cfg, sp))
            records.append(_papr_record("EP", point, cfg, ep))
        return records

    tasks = [(cfg, i, t) for i in range(len(points)) for t in range(cfg.trials)]
    results = _map(_trial_task, tasks, threads)
    for i, point in enumerate(points):
        chunk = results[i * cfg.trials : (i + 1) * cfg.trials]
        for name in cfg.pipelines:
            records.append(_aggregate(name, point, cfg, [r[name] for r in chunk]))
        log.info("point %d/%d done: %s", i + 1, len(points), point)
    return records
