from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import limid

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FIXTURE_DIR = Path(limid.__file__).parent / "fixtures"
GOLDEN_DIR = Path(__file__).parent / "golden"

# elimination order that reproduces the five-clique tree of the treatment example
TREATMENT_HINT = ["d1", "r3", "d3", "r4", "d2", "r1", "r2", "d4"]


@pytest.fixture
def fig1():
    return limid.load_fixture("fig1")


@pytest.fixture
def fig2():
    return limid.load_fixture("fig2")


@pytest.fixture
def fig3():
    return limid.load_fixture("fig3")


@pytest.fixture
def coordination():
    return limid.load_fixture("coordination")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_marginal(limid, keep, strategy=None):
    """pi_V marginalized onto ``keep`` straight from the full joint tables."""
    from limid.oracle import joint_tables
    from limid.potential import Potential

    f, u = joint_tables(limid, strategy)
    u = np.broadcast_to(u, f.shape)
    keep = sorted(keep)
    axes = tuple(i for i, v in enumerate(limid.variables) if v not in keep)
    prob = f.sum(axis=axes)
    weighted = (f * u).sum(axis=axes)
    util = np.divide(weighted, prob, out=np.zeros_like(prob), where=prob > 1e-300)
    return Potential(tuple(keep), prob, util)
