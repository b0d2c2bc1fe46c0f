import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ctoa.spectrum import BoxConfig
from ctoa.states import packet_from_config

settings.register_profile(
    "ctoa",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ctoa")

# packets of the three arrival-time figures (atomic units)
FAST = [{"x0": -1.0, "p0": 100.0, "fwhm": 0.05}]
BACKFLOW = [{"x0": -1.0, "p0": 200.0, "fwhm": 0.05}, {"x0": -0.5, "p0": 100.0, "fwhm": 0.05}]
SLOW = [{"x0": -1.0, "p0": 5.0, "fwhm": 0.05}, {"x0": -0.5, "p0": 1.5, "fwhm": 0.05}]


@pytest.fixture(scope="session")
def fast_packet():
    return packet_from_config(FAST)


@pytest.fixture(scope="session")
def backflow_packet():
    return packet_from_config(BACKFLOW)


@pytest.fixture(scope="session")
def slow_packet():
    return packet_from_config(SLOW)


@pytest.fixture(scope="session")
def unit_box():
    return BoxConfig(1.0)


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
