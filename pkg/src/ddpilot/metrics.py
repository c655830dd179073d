"""Link metrics: BER, data density, effective throughput, channel NMSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import EpPilotConfig

NMSE_FLOOR_DB = -120.0


@dataclass(frozen=True)
class MetricsRecord:
    """One aggregated sweep point.

    For link runs ``papr_db`` is the median per-frame PAPR. PAPR-only runs
    report the mean instead and leave the link metrics as NaN.
    """

    scheme: str
    Q: int
    snr_db: float
    pdr_db: float
    v_max_kmh: float
    channel_kind: str
    trials: int
    ber: float
    eff_throughput: float
    nmse_db: float
    papr_db: float
    papr_p99_db: float = float("nan")

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("a record needs at least one trial")
        if np.isfinite(self.ber) and not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber out of range: {self.ber}")
        if self.eff_throughput > np.log2(self.Q) + 1e-12:
            raise ValueError(f"throughput {self.eff_throughput} exceeds log2(Q)")


def ber(bits: np.ndarray, bits_hat: np.ndarray) -> float:
    bits = np.asarray(bits).ravel()
    bits_hat = np.asarray(bits_hat).ravel()
    if bits.size != bits_hat.size:
        raise ValueError(f"bit blocks differ in length: {bits.size} vs {bits_hat.size}")
    if bits.size == 0:
        raise ValueError("empty bit block")
    return float(np.count_nonzero(bits != bits_hat)) / bits.size


def data_density(scheme: str, ep: EpPilotConfig | None = None) -> float:
    """Fraction of resource elements carrying data: 1 for SP, 1 - 1/(K_f K_t) for EP."""
    if scheme == "SP":
        return 1.0
    if scheme == "EP":
        ep = ep or EpPilotConfig()
        return 1.0 - 1.0 / (ep.K_f * ep.K_t)
    raise ValueError(f"unknown pilot scheme {scheme!r}")


def effective_throughput(ber_value: float, density: float, Q: int) -> float:
    """Correct data bits per resource element, (1 - BER) * density * log2(Q)."""
    if not 0.0 <= ber_value <= 1.0:
        raise ValueError(f"ber out of range: {ber_value}")
    return (1.0 - ber_value) * density * np.log2(Q)


def nmse_db(H_hat: np.ndarray, H_true: np.ndarray) -> float:
    ref = np.linalg.norm(H_true) ** 2
    if ref == 0:
        raise ValueError("NMSE is undefined for an all-zero reference channel")
    err = np.linalg.norm(np.asarray(H_hat) - H_true) ** 2
    if err == 0:
        return NMSE_FLOOR_DB
    return max(float(10 * np.log10(err / ref)), NMSE_FLOOR_DB)
