import pytest

from lcdcsim.config import scaled
from lcdcsim.units import MS


@pytest.fixture
def desk():
    """Desk-scale scenario with a short horizon, for quick integration checks."""
    return scaled("desk").replace("run", duration=1 * MS)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
