"""Synthetic two-class image generator: filled discs ("blob") vs annuli ("ring")."""

from __future__ import annotations

import numpy as np

from .image_io import RgbImage

CLASSES = ("blob", "ring")


def _place(rng, size, radius, placed, tries=200):
    for _ in range(tries):
        cy, cx = rng.uniform(radius + 1, size - radius - 1, size=2)
        if all(np.hypot(cy - y, cx - x) > radius + r + 2 for y, x, r in placed):
            return cy, cx
    return None


def synthetic_image(kind: str, rng: np.random.Generator, size: int = 64, noise: int = 20) -> RgbImage:
    """One ``size x size`` RGB image with 2-4 dark shapes on a noisy light background."""
    if kind not in CLASSES:
        raise ValueError(f"kind must be one of {CLASSES}")
    background = rng.integers(150, 206, size=3)
    foreground = rng.integers(30, 91, size=3)
    yy, xx = np.mgrid[0:size, 0:size]
    shape_mask = np.zeros((size, size), dtype=bool)
    placed = []
    scale = size / 64.0
    for _ in range(rng.integers(2, 5)):
        outer = max(3.5, rng.uniform(5.0, 10.0) * scale)
        centre = _place(rng, size, outer, placed)
        if centre is None:
            continue
        placed.append((*centre, outer))
        dist = np.hypot(yy - centre[0], xx - centre[1])
        if kind == "blob":
            shape_mask |= dist <= outer
        else:
            shape_mask |= (dist <= outer) & (dist >= outer - max(1.5, rng.uniform(2.0, 3.5) * scale))
    img = np.where(shape_mask[..., None], foreground, background).astype(np.int64)
    img += rng.integers(-noise, noise + 1, size=img.shape)
    return RgbImage(np.clip(img, 0, 255).astype(np.uint8))


def synthetic_dataset(n_per_class: int = 400, size: int = 64, seed: int = 0, test_fraction: float = 0.30):
    """Images, labels and a stratified train/test split (``"train"``/``"test"`` per image)."""
    rng = np.random.default_rng(seed)
    images, labels, splits = [], [], []
    n_test = int(round(test_fraction * n_per_class))
    for kind in CLASSES:
        for i in range(n_per_class):
            images.append(synthetic_image(kind, rng, size))
            labels.append(kind)
            splits.append("test" if i < n_test else "train")
    return images, labels, splits
