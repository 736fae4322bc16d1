import numpy as np
import pytest

from hotinfer.data import standardize
from hotinfer.simulation import gen_design


def make_data(n=60, p=40, rho=0.5, s=5, seed=0, sigma=1.0):
    rng = np.random.default_rng(seed)
    X = gen_design(n, p, rho, rng)
    beta = np.zeros(p)
    beta[:s] = rng.uniform(0.5, 2.0, size=s)
    eps = sigma * rng.standard_normal(n)
    data = standardize(X, X @ beta + eps)
    # regenerate y on the standardized design so the truth is exact
    y = data.X @ beta + eps
    return standardize(data.X, y), beta, eps


@pytest.fixture
def small_data():
    data, beta, eps = make_data()
    return data


@pytest.fixture
def truth_data():
    return make_data(seed=3)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a numbered acceptance outcome, then assert it."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
