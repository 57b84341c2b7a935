"""Integration tests against the real MNIST IDX files."""

import os

import numpy as np
import pytest
from digits.dataset import class_split, subsample
from digits.idx import load_mnist

pytestmark = [
    pytest.mark.integration,
    pytest.mark.skipif(not os.getenv("PNC_MNIST_DIR"), reason="PNC_MNIST_DIR not set"),
]


@pytest.fixture(scope="module")
def mnist():
    return load_mnist(os.environ["PNC_MNIST_DIR"])


class TestMnist:
    """Counts, shapes and value ranges of the published splits."""

    def test_split_sizes(self, mnist) -> None:
        assert len(mnist.train) == 60000
        assert len(mnist.test) == 10000
        assert mnist.train.images.shape[1:] == (1, 28, 28)

    def test_every_digit_present(self, mnist) -> None:
        assert sorted(np.unique(mnist.test.labels).tolist()) == list(range(10))

    def test_pixels_in_unit_range(self, mnist) -> None:
        assert mnist.test.images.min() >= 0.0
        assert mnist.test.images.max() <= 1.0

    def test_small_scale_subsample(self, mnist) -> None:
        cloned = class_split(mnist.train, [5])
        subset = subsample(cloned, 0.3, seed=0)
        assert len(cloned) == 5421
        assert len(subset) == 1626
