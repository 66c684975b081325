import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import sparse

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (criterion, status, detail) lines filled in by test_acceptance
ACCEPTANCE_LINES = []


def planted_partition(seed, blocks=4, size=50, p_in=0.3, p_out=0.02):
    """Symmetric 0/1 stochastic-block-model graph and its block labels."""
    rng = np.random.default_rng(seed)
    n = blocks * size
    labels = np.repeat(np.arange(blocks), size)
    p = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < p, 1)
    return sparse.csr_matrix((upper | upper.T).astype(float)), labels


def cliques(*sizes):
    """Disjoint unit-weight cliques."""
    n = sum(sizes)
    a = np.zeros((n, n))
    start = 0
    for s in sizes:
        a[start : start + s, start : start + s] = 1.0
        start += s
    np.fill_diagonal(a, 0.0)
    return sparse.csr_matrix(a), np.repeat(np.arange(len(sizes)), sizes)


@pytest.fixture
def sbm():
    return planted_partition


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{status:4s}  {name}: {detail}")
