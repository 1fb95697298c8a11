import numpy as np
import pytest

from exclusion_lab.kernels import DEFAULT_KERNEL, RateKernel, TaggedKernel


@pytest.fixture
def p_star() -> RateKernel:
    return DEFAULT_KERNEL


@pytest.fixture
def q_slow() -> TaggedKernel:
    return TaggedKernel({1: 0.01, -1: 0.012})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
