import math

import pytest

from masprt.channel import ChannelParams

# Frozen with mpmath at 30 digits: erfc(rho / sqrt(2 t)) differences, rho^2 = 0.3, ts = 0.1
PI_REF = (
    0.083264516663550402,
    0.13740684525629639,
    0.09663914594306731,
    0.069165722908318562,
    0.05210179530976719,
)


@pytest.fixture
def params():
    return ChannelParams(rho=math.sqrt(0.3), ts=0.1, lambda0=4.0, tau=0.0)


# One line per acceptance criterion, echoed in the terminal summary so the
# verdicts are visible even when test output is captured.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
