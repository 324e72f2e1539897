import numpy as np
import pytest

from evrecon.events import EventStream

ACCEPTANCE_LINES = []


def random_stream(rng, width, height, n, span=(0.0, 1.0)):
    t = rng.uniform(span[0], span[1], n)
    return EventStream.from_arrays(width, height, t, rng.integers(0, width, n), rng.integers(0, height, n),
                                   rng.choice([-1, 1], n), span=span)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
