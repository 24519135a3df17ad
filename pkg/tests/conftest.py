"""Shared fixtures: small rigs and clean synthetic scenes."""

import numpy as np
import pytest

from triview import Camera, Rig, make_ring_rig


@pytest.fixture
def ring4():
    return make_ring_rig(4)


@pytest.fixture
def ring8():
    return make_ring_rig(8)


@pytest.fixture
def stereo_rig():
    """Two axis-aligned pinhole cameras, one shifted 1 m along x.

    Deliberately bare (K = I) so expected pixel values can be written
    down by hand in the tests.
    """
    P1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    R = np.eye(3)
    t = np.array([-1.0, 0.0, 0.0])  # camera center at (1, 0, 0)
    P2 = np.hstack([R, t[:, None]])
    return Rig((Camera("left", P1, (640, 480)),
                Camera("right", P2, (640, 480))))
