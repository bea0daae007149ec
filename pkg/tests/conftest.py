import numpy as np
import pytest

from nucmc.sampling import SampleMultiset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def toy():
    """2x2 matrix observed at (1,1) twice and (2,2) once."""
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    omega = SampleMultiset.from_pairs(2, 2, [(1, 1), (1, 1), (2, 2)])
    return A, omega


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record one acceptance line; printed immediately and again in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
