import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=200, derandomize=True)
settings.load_profile("suite")

# five collinear points whose barycenter sits at the origin; the minimal
# 2-point core is the tight pair {28, 29}, not the two points furthest
# from the barycenter
FIVE_POINTS = (-24.0, -19.0, -14.0, 28.0, 29.0)


@pytest.fixture
def five_point_cfg():
    from conformist import PointConfiguration

    return PointConfiguration(FIVE_POINTS)


@pytest.fixture
def gen():
    return np.random.default_rng(20250808)
