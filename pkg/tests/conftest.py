import numpy as np
import pytest

from fracbubble.core import ProblemParams, TowerConfig


def rel_err(a, b, floor=1e-300):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / scale


@pytest.fixture
def params59():
    return ProblemParams(N=5, s=0.9)


@pytest.fixture
def tower59(params59):
    return TowerConfig(m=4, rbar=1.0, ybar=np.zeros(3), lam=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
