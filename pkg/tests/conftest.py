import math

import numpy as np
import pytest

from ls2d.geometry import Circle, Scatterer, constant_contrast, gaussian_contrast, make_curve


@pytest.fixture
def disc():
    return Scatterer(Circle(1.0), 0.3, constant_contrast(math.sqrt(2.0)))


@pytest.fixture
def bean():
    return Scatterer(make_curve("bean"), 0.08, gaussian_contrast(0.5, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Record one pass/fail line for the acceptance summary."""

    def _record(name, ok, detail):
        _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
