import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kaehlertwist.kaehler import flat_disk, round_s2
from kaehlertwist.weinstein import BaseData, FiberData, build_local_weinstein

settings.register_profile("ci", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def flat_flat():
    return build_local_weinstein(BaseData.of(flat_disk(1, alpha="xdy")), FiberData.of(flat_disk(1)))


@pytest.fixture(scope="session")
def s2_flat():
    return build_local_weinstein(BaseData.of(round_s2()), FiberData.of(flat_disk(1)))


@pytest.fixture(scope="session")
def flat_c2():
    return build_local_weinstein(BaseData.of(flat_disk(1, alpha="xdy")), FiberData.of(flat_disk(2)))


@pytest.fixture(scope="session")
def product():
    return build_local_weinstein(BaseData.of(flat_disk(1, alpha="xdy")), FiberData.of(flat_disk(1, c0=2.0, action=False)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
