from __future__ import annotations

import numpy as np
import pytest

from orthant_reflect.core import validate_matrix
from orthant_reflect.paths import StepFunction
from orthant_reflect.skorokhod import fixed_point_form_residual, scheme_observers

FIXED_POINT_FORM_TOL = 1e-12


class _FormStats:
    runs = 0
    worst = 0.0


ACCEPTANCE_LINES: list[str] = []


def _fixed_point_form_guard(Q, y_values, k_values):
    gap = fixed_point_form_residual(Q, y_values, k_values)
    _FormStats.runs += 1
    _FormStats.worst = max(_FormStats.worst, gap)
    assert gap <= FIXED_POINT_FORM_TOL, f"fixed-point form violated: gap {gap!r}"


@pytest.fixture(autouse=True, scope="session")
def fixed_point_form_guard():
    """Every fast-scheme run in the suite must satisfy k = F^n(k delayed by one step)."""
    scheme_observers.append(_fixed_point_form_guard)
    yield _FormStats
    scheme_observers.remove(_fixed_point_form_guard)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"fixed-point form checked on {_FormStats.runs} scheme runs; "
        f"max gap {_FormStats.worst:.3g} (tol {FIXED_POINT_FORM_TOL:g})"
    )


@pytest.fixture
def acceptance():
    """``record(number, title, passed, detail)`` prints and keeps one line per criterion."""

    def record(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


@pytest.fixture
def example_q():
    return validate_matrix([[0.0, 0.5], [0.5, 0.0]])


@pytest.fixture
def jump_step():
    return StepFunction([0.0, 1.0], [[0.0, 0.0], [-1.0, -1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
