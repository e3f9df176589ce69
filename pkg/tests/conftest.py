import numpy as np
import pytest


def ulp_tol(*arrays, factor=8):
    """factor ulp at the scale of the largest magnitude involved (floored at 1)."""
    scale = max(float(np.max(np.abs(a))) for a in arrays)
    return factor * np.spacing(max(scale, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
