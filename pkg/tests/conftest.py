import numpy as np
import pytest

from htpoisson import Exponential, Lomax, ModelParams, build_stationary


@pytest.fixture(scope="session")
def mm1_table():
    """M/M/1 case: Exponential(1) jumps at rho = 0.5."""
    return build_stationary(ModelParams(0.5, Exponential()), 0.005, 30.0)


@pytest.fixture(scope="session")
def lomax_half_table():
    return build_stationary(ModelParams(0.5, Lomax(2.5)), 0.005, 30.0)


@pytest.fixture(scope="session")
def lomax_09_table():
    return build_stationary(ModelParams(0.9, Lomax(2.5)), 0.02, 200.0, tol=1e-4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report(capsys):
    """Print a line straight to the terminal, bypassing capture."""
    def emit(line):
        with capsys.disabled():
            print(line, flush=True)
    return emit
