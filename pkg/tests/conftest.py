import numpy as np
import pytest

from sderk import kernels

ACCEPTANCE_LINES: list = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test under each kernel backend via the environment flag."""
    if request.param == "numba" and kernels._numba is None:
        pytest.skip("numba not installed")
    monkeypatch.setenv(kernels.ENV_FLAG, request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
