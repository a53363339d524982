import numpy as np
import pytest

from pkrg.spectral_field import FrequencyGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return FrequencyGrid(16)


@pytest.fixture(scope="session")
def grid32():
    return FrequencyGrid(32)


@pytest.fixture(scope="session")
def grid64():
    return FrequencyGrid(64)


def rel(a, b):
    """Relative distance with an absolute floor."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Print one pass/fail line and keep it for the end-of-session summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def emit(text):
        print(text)
        lines.append(text)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
