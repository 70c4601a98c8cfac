import logging

import pytest
from hypothesis import settings

from droplet_inverse.droplets import solve_ball_spectrum
from droplet_inverse.kernels import demo_medium

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spectrum():
    return solve_ball_spectrum()


@pytest.fixture(scope="session")
def medium():
    return demo_medium()


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("droplet_inverse").setLevel(logging.ERROR)
    yield


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record ``PASS/FAIL <name>: <detail>`` for the terminal summary and echo it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def emit(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        lines.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
