from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from glyforecast.series import UniformSeries, Window

settings.register_profile(
    "default", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def make_series(values, interval=5, start=T0):
    return UniformSeries(start, interval, np.asarray(values, dtype=float))


def make_window(values, interval=5):
    """Warm window holding exactly ``values``."""
    values = np.asarray(values, dtype=float)
    return Window(make_series(values, interval), len(values) * interval / 60)


@pytest.fixture
def t0():
    return T0


@pytest.fixture
def minutes():
    return lambda m: T0 + timedelta(minutes=m)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def record_verdict(number: int, ok: bool, summary: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {summary}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
