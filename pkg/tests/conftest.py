import numpy as np
import pytest

from pareto_outlier import ClaimSample, RandomStream


@pytest.fixture
def stream():
    return RandomStream(20240607)


@pytest.fixture
def small_sample():
    return ClaimSample(np.array([52000.0, 61000.0, 75500.0, 58000.0, 230000.0, 54100.0, 98000.0]))
