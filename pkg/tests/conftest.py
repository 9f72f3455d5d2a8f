import re
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def model_separatrix():
    """Separatrix search for m=3, r=2, shared by every module that needs it."""
    from reslab.damping import model_case
    from reslab.phase import find_separatrix

    return find_separatrix(model_case(3, 2), t_max=1e5)


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        order = lambda s: (int(re.match(r"AC(\d+)", s).group(1)), s)
        for line in sorted(_ACCEPTANCE_LINES, key=order):
            terminalreporter.write_line(line)
