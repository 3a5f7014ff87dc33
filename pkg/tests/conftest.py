import numpy as np
import pytest

from sphereflow.fields import NoiseIntensity, make_initial
from sphereflow.grid import Grid1D

TWO_PI = 2.0 * np.pi


@pytest.fixture
def grid64():
    return Grid1D(length=TWO_PI, n=64)


@pytest.fixture
def grid129():
    return Grid1D(length=TWO_PI, n=129)


@pytest.fixture
def profile129(grid129):
    return make_initial("great_circle_profile", grid129, amplitude=0.5)


@pytest.fixture
def h_cos01(grid64):
    return NoiseIntensity.cosine(grid64, alpha=0.1, k=1)
