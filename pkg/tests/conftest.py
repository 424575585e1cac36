import numpy as np
import pytest

from proxymotion.skeleton import toy_skeleton
from proxymotion.synth import synthetic_hops, synthetic_walk


@pytest.fixture(scope="session")
def skel():
    return toy_skeleton()


@pytest.fixture(scope="session")
def walk(skel):
    return synthetic_walk(skel, 120, seed=3)


@pytest.fixture(scope="session")
def hops(skel):
    return synthetic_hops(skel, 120, seed=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
