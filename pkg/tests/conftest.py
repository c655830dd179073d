import numpy as np
import pytest

from ddpilot.channel import Paths
from ddpilot.waveform import FrameConfig

# criterion lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_paths(rng: np.random.Generator, frame: FrameConfig, P: int, unit_power: bool = False) -> Paths:
    """Paths with fractional delays inside the CP and Doppler within +-N/4 bins."""
    alpha = rng.standard_normal(P) + 1j * rng.standard_normal(P)
    if unit_power:
        alpha /= np.linalg.norm(alpha)
    tau = rng.uniform(0, min(frame.T_cp, 4 * frame.delay_bin), P)
    nu = rng.uniform(-0.25, 0.25, P) * frame.N * frame.doppler_bin
    return Paths(alpha, tau, nu)


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def table1():
    return FrameConfig()


@pytest.fixture
def small_frame():
    # T_cp spans several delay bins so random paths stay inside the CP
    return FrameConfig(M=8, N=4, delta_f=30e3, T_cp=5e-6)
