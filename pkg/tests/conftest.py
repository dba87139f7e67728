import numpy as np
import pytest

from fishmonger.curves import ExponentialCurve, RationalCurve, RewardCurve


@pytest.fixture
def rational():
    return RewardCurve(RationalCurve())


@pytest.fixture
def exponential():
    return RewardCurve(ExponentialCurve(rate=1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
