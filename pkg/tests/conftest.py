import numpy as np
import pytest
from hypothesis import strategies as st

from qfmct.data import Dataset


def random_psd(rng, p, rank=None):
    rank = p if rank is None else rank
    G = rng.standard_normal((p, rank))
    return G @ G.T


def random_dataset(rng, a=3, d=4, sizes=None, shift=None):
    sizes = sizes or [int(rng.integers(6, 15)) for _ in range(a)]
    groups = []
    for i, n in enumerate(sizes):
        L = rng.standard_normal((d, d))
        X = rng.standard_normal((n, d)) @ L
        if shift is not None:
            X = X + shift[i]
        groups.append(X)
    return Dataset(tuple(groups))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
