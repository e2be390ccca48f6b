import numpy as np
import pytest

from swimprom.config import RunConfig
from swimprom.pipeline import build_prom, make_case


@pytest.fixture(scope="session")
def case():
    """Default 216-element fish block with the SO1 search space."""
    return make_case(RunConfig().validate())


@pytest.fixture(scope="session")
def prom(case):
    rob, model, _ = build_prom(case)
    return rob, model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
