import numpy as np
import pytest
from hypothesis import settings

from magbloch.lattice import DirectionFrame, build_lattice

settings.register_profile("repo", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def z3():
    return build_lattice(np.eye(3))


@pytest.fixture
def z2():
    return build_lattice(np.eye(2))


@pytest.fixture
def skew3():
    return build_lattice([[1, 0, 0], [0.5, np.sqrt(3) / 2, 0], [0, 0, 1]])


def frame(lat, *coords):
    return DirectionFrame.from_coords(lat, coords)
