import numpy as np
import pytest
from scipy import ndimage

from topoc.synthetic import synthetic_dataset, synthetic_image
from topoc.verification import betti_by_counting
from topoc.filtration import BinaryImage


@pytest.mark.parametrize("kind", ["blob", "ring"])
def test_shape_counts_and_topology(kind):
    rng = np.random.default_rng(4)
    for _ in range(10):
        img = synthetic_image(kind, rng, 64, noise=0)
        px = img.pixels.astype(int)
        dark = px.sum(axis=2) < px.sum(axis=2).max()
        n_shapes = ndimage.label(dark, structure=np.ones((3, 3)))[1]
        assert 2 <= n_shapes <= 4
        b0, b1 = betti_by_counting(BinaryImage(dark))
        assert b0 == n_shapes
        assert b1 == (n_shapes if kind == "ring" else 0)


def test_noise_bounded():
    clean = synthetic_image("blob", np.random.default_rng(1), 64, noise=0).pixels.astype(int)
    noisy = synthetic_image("blob", np.random.default_rng(1), 64, noise=20).pixels.astype(int)
    assert np.abs(noisy - clean).max() <= 20
    assert np.abs(noisy - clean).max() > 0


def test_dataset_split():
    images, labels, splits = synthetic_dataset(n_per_class=10, size=32, seed=3)
    assert len(images) == 20 and labels.count("blob") == 10
    assert splits.count("test") == 6
    assert all(im.pixels.shape == (32, 32, 3) for im in images)
