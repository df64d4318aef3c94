"""Toy training loop used by the end-to-end gradient check.

A tiny backbone is fit to the synthetic four-class dataset with plain
SGD for a fixed number of steps. The harness asserts the loss halves,
which catches sign errors and broken gradient paths anywhere in the
stack without needing a GPU or a real dataset.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .backbone import Backbone, BackboneConfig, StageConfig
from .data import ToyDataset
from .tensor import Tensor, log_softmax


def toy_config() -> BackboneConfig:
    """Small enough to train on CPU in seconds; windows fall back to full maps."""
    stages = (
        StageConfig(depth=1, dim=8, ratio=Fraction(2), attention=False),
        StageConfig(depth=1, dim=12, ratio=Fraction(2), attention=False),
        StageConfig(depth=2, dim=16, ratio=Fraction(2), attention=True),
        StageConfig(depth=1, dim=24, ratio=Fraction(2), attention=True),
    )
    return BackboneConfig(stages=stages, classes=4)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log likelihood over the batch."""
    n, c = logits.data.shape
    assert labels.shape == (n,)
    logp = log_softmax(logits, axis=1)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    picked = logp * Tensor(onehot)
    return picked.sum() * (-1.0 / n)


def sgd_step(model: Backbone, lr: float) -> None:
    for _, p in model.named_parameters():
        if p.grad is not None:
            p.data -= lr * p.grad


def train_toy(seed: int = 0, steps: int = 200, lr: float = 0.05, batch_size: int = 16):
    """Train the toy model; returns (model, per-step loss list).

    Bit-deterministic in the seed: dataset, init, and batch order all
    derive from it.
    """
    dataset = ToyDataset(n_per_class=64, seed=seed)
    model = Backbone(toy_config(), seed=seed + 1)
    model.train()
    losses = []
    for x, y in dataset.batches(batch_size, steps, seed + 2):
        model.zero_grad()
        logits = model.forward(Tensor(x))
        loss = cross_entropy(logits, y)
        loss.backward()
        sgd_step(model, lr)
        losses.append(float(loss.data))
    model.eval()
    return model, losses
