"""Delay-Doppler superimposed-pilot OFDM link simulator."""

from .channel import ChannelRealization, Paths, apply_channel, channel_adjoint, draw_channel
from .equalization import EqualizerConfig, EqualizerKind, full_mmse, imfc_landweber, single_tap_mmse
from .estimation import CeConfig, EstimatedChannel, ep_estimate, fractional_ce, tm_estimate
from .harness import PIPELINES, ExperimentConfig, run_sweep, run_trial
from .numerics import Domain, Grid
from .waveform import EpPilotConfig, FrameConfig, SpPilotConfig

__all__ = [
    "CeConfig",
    "ChannelRealization",
    "Domain",
    "EpPilotConfig",
    "EqualizerConfig",
    "EqualizerKind",
    "EstimatedChannel",
    "ExperimentConfig",
    "FrameConfig",
    "Grid",
    "PIPELINES",
    "Paths",
    "SpPilotConfig",
    "apply_channel",
    "channel_adjoint",
    "draw_channel",
    "ep_estimate",
    "fractional_ce",
    "full_mmse",
    "imfc_landweber",
    "run_sweep",
    "run_trial",
    "single_tap_mmse",
    "tm_estimate",
]
