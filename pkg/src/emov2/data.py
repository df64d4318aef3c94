"""Synthetic four-class image dataset for the toy training check.

32x32x3 images, one geometric pattern family per class: horizontal
stripes, checkerboard, centered blob, diagonal gradient. Per-sample
jitter (phase, scale, amplitude) plus gaussian noise keeps the task
nontrivial while staying linearly-convolutionally separable. Generation
is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np

CLASS_NAMES = ("stripes", "checker", "blob", "gradient")
IMAGE_SIZE = 32


def _stripes(rng):
    period = rng.integers(6, 10)
    phase = rng.uniform(0, 2 * np.pi)
    rows = np.arange(IMAGE_SIZE)
    img = np.sin(2 * np.pi * rows / period + phase)
    return np.tile(img[:, None], (1, IMAGE_SIZE))


def _checker(rng):
    cell = int(rng.integers(4, 7))
    rows = np.arange(IMAGE_SIZE) // cell
    cols = np.arange(IMAGE_SIZE) // cell
    return ((rows[:, None] + cols[None, :]) % 2).astype(float) * 2.0 - 1.0


def _blob(rng):
    cy, cx = rng.uniform(12, 20, size=2)
    sigma = rng.uniform(4, 7)
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    return 2.0 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma * sigma)) - 1.0


def _gradient(rng):
    angle = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    proj = np.cos(angle) * xx + np.sin(angle) * yy
    proj = proj - proj.mean()
    return proj / np.abs(proj).max()


_MAKERS = (_stripes, _checker, _blob, _gradient)


class ToyDataset:
    """Balanced, standardized, deterministic in the seed."""

    def __init__(self, n_per_class: int = 64, seed: int = 0, noise: float = 0.25):
        rng = np.random.default_rng(seed)
        images = []
        labels = []
        for label, maker in enumerate(_MAKERS):
            for _ in range(n_per_class):
                base = maker(rng)
                amp = rng.uniform(0.7, 1.3, size=3)
                img = base[None, :, :] * amp[:, None, None]
                img = img + rng.normal(0.0, noise, size=img.shape)
                images.append(img)
                labels.append(label)
        x = np.stack(images)
        order = rng.permutation(len(labels))
        self.images = ((x - x.mean()) / x.std())[order]
        self.labels = np.asarray(labels)[order]

    def __len__(self):
        return len(self.labels)

    def batches(self, batch_size: int, steps: int, seed: int):
        """Yield `steps` random batches; the sequence is a function of seed."""
        rng = np.random.default_rng(seed)
        n = len(self)
        for _ in range(steps):
            idx = rng.integers(0, n, size=batch_size)
            yield self.images[idx], self.labels[idx]
