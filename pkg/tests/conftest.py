import pytest
from hypothesis import settings

from spectrace.model import ChannelPotential, PotentialSpec

# fixed example sequences keep test logs reproducible
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


@pytest.fixture
def cos2():
    """q(t) = 0.2 cos(2 pi t)."""
    return ChannelPotential((0.0, 0.2))


@pytest.fixture
def single_channel_potential(cos2):
    return PotentialSpec({1: cos2})


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
