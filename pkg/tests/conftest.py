import pytest

from mdiprts.keyrate import GridSpec, rate_map
from mdiprts.presets import REFERENCE_DEVICE, REFERENCE_INTENSITIES

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def device():
    return REFERENCE_DEVICE


@pytest.fixture(scope="session")
def intensities():
    return REFERENCE_INTENSITIES


@pytest.fixture(scope="session")
def reference_map(device, intensities):
    return rate_map(device, intensities, intensities, GridSpec(192, 1e-4))


@pytest.fixture(scope="session")
def coarse_map(device, intensities):
    return rate_map(device, intensities, intensities, GridSpec(64, 1e-4))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
