import numpy as np
import pytest

from dqlab import make_grid, set_hbar


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid64():
    return make_grid(0.0, 1.0, 64)


@pytest.fixture(autouse=True)
def _reset_hbar():
    set_hbar(1.0)
    yield
    set_hbar(1.0)


# -- acceptance reporting -----------------------------------------------------------

_CRITERIA: dict[int, str] = {}


class _Criterion:
    def __init__(self):
        self.number = None

    def report(self, number: int, ok: bool, detail: str) -> bool:
        self.number = number
        _CRITERIA[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        return ok


@pytest.fixture
def criterion(request):
    rec = _Criterion()
    yield rec
    number = rec.number or int(request.node.name.split("_")[1])
    _CRITERIA.setdefault(number, f"FAIL criterion {number}: did not complete")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
