"""Parameterized layers on top of the tensor core.

Modules register parameters and buffers by plain attribute assignment;
named_parameters walks the attribute tree in insertion order, which is also
the build order, so a seeded constructor run is bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) with resampling outside +-2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


class Module:
    def __init__(self):
        self.training = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # -- tree walking -----------------------------------------------------
    def _entries(self):
        for name, value in vars(self).items():
            if name == "training":
                continue
            yield name, value

    def named_parameters(self, prefix: str = ""):
        for name, value in self._entries():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def named_buffers(self, prefix: str = ""):
        for name, value in self._entries():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and not value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_buffers(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{full}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True):
        self.training = mode
        for _, value in self._entries():
            if isinstance(value, Module):
                value.train(mode)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict:
        out = {name: p.data for name, p in self.named_parameters()}
        out.update({name: b.data for name, b in self.named_buffers()})
        return out

    def load_state_dict(self, state: dict):
        own = dict(self.named_parameters())
        own.update(dict(self.named_buffers()))
        missing = [k for k in own if k not in state]
        if missing:
            raise KeyError(f"state dict missing entries: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        for name, t in own.items():
            arr = np.asarray(state[name])
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}")
            t.data = arr.astype(t.data.dtype, copy=True)


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self.items = list(modules)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def append(self, m):
        self.items.append(m)


class Conv2d(Module):
    def __init__(self, rng, in_ch: int, out_ch: int, kernel: int, stride: int = 1,
                 padding: int | None = None, groups: int = 1):
        super().__init__()
        if in_ch % groups or out_ch % groups:
            raise ValueError(f"channels {in_ch}->{out_ch} not divisible by groups={groups}")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        self.groups = groups
        self.weight = Tensor(
            trunc_normal(rng, (out_ch, in_ch // groups, kernel, kernel)), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class Linear(Module):
    def __init__(self, rng, in_features: int, out_features: int):
        super().__init__()
        self.weight = Tensor(trunc_normal(rng, (out_features, in_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.scale = Tensor(np.ones((1, channels, 1, 1)), requires_grad=True)
        self.shift = Tensor(np.zeros((1, channels, 1, 1)), requires_grad=True)
        self.running_mean = Tensor(np.zeros((1, channels, 1, 1)))
        self.running_var = Tensor(np.ones((1, channels, 1, 1)))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(f"batchnorm2d: expected [N,{self.channels},H,W], got {x.shape}")
        if self.training:
            mu = T.mean(x, axis=(0, 2, 3), keepdims=True)
            centered = T.sub(x, mu)
            var = T.mean(T.mul(centered, centered), axis=(0, 2, 3), keepdims=True)
            # biased variance, consistent with the normalization statistic
            m = self.momentum
            self.running_mean.data = (1 - m) * self.running_mean.data + m * mu.data
            self.running_var.data = (1 - m) * self.running_var.data + m * var.data
            inv = T.div(T._wrap(1.0), T.sqrt(T.add(var, T._wrap(self.eps))))
            normed = T.mul(centered, inv)
        else:
            inv = 1.0 / np.sqrt(self.running_var.data + self.eps)
            normed = T.mul(T.sub(x, Tensor(self.running_mean.data)), Tensor(inv))
        return T.add(T.mul(normed, self.scale), self.shift)


class LayerNormTokens(Module):
    """Layer norm over the channel axis of [N, C, H, W], one token per pixel."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.scale = Tensor(np.ones((1, channels, 1, 1)), requires_grad=True)
        self.shift = Tensor(np.zeros((1, channels, 1, 1)), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(f"layernorm_tokens: expected [N,{self.channels},H,W], got {x.shape}")
        mu = T.mean(x, axis=1, keepdims=True)
        centered = T.sub(x, mu)
        var = T.mean(T.mul(centered, centered), axis=1, keepdims=True)
        inv = T.div(T._wrap(1.0), T.sqrt(T.add(var, T._wrap(self.eps))))
        return T.add(T.mul(T.mul(centered, inv), self.scale), self.shift)


class Identity(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x


def drop_path(x: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Zero whole samples with probability rate, rescale survivors by 1/(1-rate)."""
    if not training or rate <= 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"drop_path rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    mask = (rng.random(x.shape[0]) < keep).astype(x.dtype.type) / keep
    return T.mul(x, Tensor(mask.reshape(-1, *([1] * (x.ndim - 1)))))


def global_avg_pool(x: Tensor) -> Tensor:
    """[N, C, H, W] -> [N, C]."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool expects rank 4, got {x.ndim}")
    return T.mean(x, axis=(2, 3))
