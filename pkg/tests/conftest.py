import numpy as np
import pytest

from msnlac import Image, make_shapes, simulate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_region_image():
    """32x32 image: left half reflectivity 1, right half 4, alpha=4 speckle."""
    clean = np.ones((32, 32))
    clean[:, 16:] = 4.0
    gt = np.zeros((32, 32), dtype=bool)
    gt[:, 16:] = True
    img = simulate(Image(clean), 4.0, seed=7)
    return img, gt


@pytest.fixture(scope="session")
def phantom128():
    return make_shapes(128, 128, fg_level=4.0, bg_level=1.0, gradient_span=2.0)
