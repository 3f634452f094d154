"""Shared fixtures and the hypothesis profile for the laboratory tests."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hardy_bellman.models import MomentPair, PParams
from hardy_bellman.monotone_fn import StepFunction

settings.register_profile(
    "lab",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")


@pytest.fixture
def p2():
    return PParams(2.0)


@pytest.fixture
def moments_212():
    return MomentPair(1.0, 2.0)


@pytest.fixture
def split_g():
    """1.5 on (0, 0.5], 0.5 on (0.5, 1]."""
    return StepFunction([0.0, 0.5, 1.0], [1.5, 0.5])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
