import math

import numpy as np
import pytest

from kpg_lab.games import MeetupGame, two_player_quadratic


@pytest.fixture
def quad():
    return two_player_quadratic(0.5)


@pytest.fixture
def decoupled():
    return two_player_quadratic(0.0)


@pytest.fixture
def meetup():
    return MeetupGame()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


MEETUP_STAR = np.array([math.atan2(2, 3), math.atan2(2, 3) - math.pi])


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    def record(number, ok, detail):
        CRITERIA[number] = f"CRITERION {number} {'PASS' if ok else 'FAIL'} {detail}"
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
