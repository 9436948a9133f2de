import numpy as np
import pytest

from partsim.data import InteractionMatrix


def random_binary(rng, n_users, n_items, density):
    R = (rng.random((n_users, n_items)) < density).astype(float)
    return R


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy():
    # 6 users x 5 items, every item interacted at least once
    R = np.array([
        [1, 1, 0, 0, 0],
        [1, 0, 1, 0, 0],
        [0, 1, 1, 1, 0],
        [0, 0, 0, 1, 1],
        [1, 0, 0, 0, 1],
        [0, 1, 0, 1, 1],
    ], dtype=float)
    return InteractionMatrix.from_dense(R)


# --- acceptance reporting ------------------------------------------------------

_CRITERIA = {}


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line per acceptance criterion; printed live and in the summary."""
    def record(number, title, passed, detail=""):
        line = f"AC{number:02d} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
