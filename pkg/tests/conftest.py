import random

import pytest

from clepsydra.config import CacheGeometry, TtlConfig


@pytest.fixture
def small_geometry():
    return CacheGeometry(ways=4, lines_per_way=64)


@pytest.fixture
def rng():
    return random.Random(1234)


# no decay event within any test run, and no expiry even if one fires
FROZEN_TTL = TtlConfig(ttl_min=10**9, ttl_max=10**9, period_base=1e15, period_min=1e15, period_max=1e15)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
