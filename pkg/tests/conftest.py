"""Shared fixtures.  The expensive objects (bell orbit family, quantized ABL
states, exact Galerkin spectrum) are built once per session."""
import numpy as np
import pytest
from hypothesis import settings, HealthCheck

from ablscar.model import SystemParams
from ablscar import semiclassics as sc
from ablscar import acceptance as acc
from ablscar.classical import find_bell_orbit
from ablscar.variation import monodromy_classify, periodic_solutions

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

E_BENCH = 92.55


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def bell(params):
    return find_bell_orbit(E_BENCH, params)


@pytest.fixture(scope="session")
def mono(bell, params):
    return monodromy_classify(bell, params.eB)


@pytest.fixture(scope="session")
def floquet(bell, mono, params):
    return periodic_solutions(bell, mono, params.eB)


@pytest.fixture(scope="session")
def bench():
    """Benchmark context; quantized states and the exact spectrum are
    computed lazily on first use and shared by all tests."""
    return acc.BenchmarkContext()


@pytest.fixture(scope="session")
def abl66(bench):
    return bench.abl_states[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
