"""Windowed multi-head self-attention over feature maps.

Two partition schemes over [B, C, H, W]:

* neighbor: the map tiles into contiguous h x w windows; window (a, b)
  holds pixels (a*h + p, b*w + q) at slot p*w + q.
* distant: windows sample the whole map on a stride grid [H/h, W/w];
  window (u, v) holds pixels (u + p*(H/h), v + q*(W/w)) at slot p*w + q.

Both produce [B*num_windows, C, h*w], channels before tokens. Queries and
keys stay at the input channel count; values may be expanded. Spanning
attention runs both partitions with shared projections and fuses the two
branch outputs by elementwise mean.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .layers import Conv2d, Module


class WindowError(ValueError):
    """Raised when a window geometry does not tile the feature map."""


def _check_divisible(H: int, W: int, h: int, w: int):
    if h <= 0 or w <= 0:
        raise WindowError(f"window {h}x{w} must be positive")
    if H % h or W % w:
        raise WindowError(f"window {h}x{w} does not divide feature map {H}x{W}")


def neighbor_partition(x: Tensor, h: int, w: int) -> Tensor:
    """[B, C, H, W] -> [B*(H/h)*(W/w), C, h*w], contiguous tiles."""
    B, C, H, W = x.shape
    _check_divisible(H, W, h, w)
    t = T.reshape(x, (B, C, H // h, h, W // w, w))
    t = T.permute(t, (0, 2, 4, 1, 3, 5))  # [B, H/h, W/w, C, h, w]
    return T.reshape(t, (B * (H // h) * (W // w), C, h * w))


def neighbor_reverse(t: Tensor, B: int, H: int, W: int, h: int, w: int) -> Tensor:
    _check_divisible(H, W, h, w)
    C = t.shape[1]
    x = T.reshape(t, (B, H // h, W // w, C, h, w))
    x = T.permute(x, (0, 3, 1, 4, 2, 5))  # [B, C, H/h, h, W/w, w]
    return T.reshape(x, (B, C, H, W))


def distant_partition(x: Tensor, h: int, w: int) -> Tensor:
    """[B, C, H, W] -> [B*(H/h)*(W/w), C, h*w], stride-grid windows."""
    B, C, H, W = x.shape
    _check_divisible(H, W, h, w)
    sh, sw = H // h, W // w
    t = T.reshape(x, (B, C, h, sh, w, sw))  # row p*sh + u -> axes (p, u)
    t = T.permute(t, (0, 3, 5, 1, 2, 4))  # [B, sh, sw, C, h, w]
    return T.reshape(t, (B * sh * sw, C, h * w))


def distant_reverse(t: Tensor, B: int, H: int, W: int, h: int, w: int) -> Tensor:
    _check_divisible(H, W, h, w)
    sh, sw = H // h, W // w
    C = t.shape[1]
    x = T.reshape(t, (B, sh, sw, C, h, w))
    x = T.permute(x, (0, 3, 4, 1, 5, 2))  # [B, C, h, sh, w, sw]
    return T.reshape(x, (B, C, H, W))


def attend(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tensor:
    """Per-window, per-head scaled dot-product attention.

    q, k: [BN, C, P]; v: [BN, E, P]. Softmax over keys; output slot p mixes
    value slots weighted by softmax(q_p . k / sqrt(head_dim)).
    """
    BN, C, P = q.shape
    E = v.shape[1]
    if C % heads or E % heads:
        raise WindowError(f"heads={heads} must divide q/k channels {C} and value channels {E}")
    head_dim = C // heads
    qh = T.reshape(q, (BN, heads, head_dim, P))
    kh = T.reshape(k, (BN, heads, head_dim, P))
    vh = T.reshape(v, (BN, heads, E // heads, P))
    logits = T.matmul(T.permute(qh, (0, 1, 3, 2)), kh)  # [BN, heads, P, P]
    weights = T.softmax(T.scale(logits, 1.0 / np.sqrt(head_dim)), axis=-1)
    out = T.matmul(vh, T.permute(weights, (0, 1, 3, 2)))  # value slots mixed per query
    return T.reshape(out, (BN, E, P))


def pick_window(H: int, W: int, preferred: int | None) -> tuple[int, int]:
    """preferred x preferred when it tiles the map, else the full map."""
    if preferred is not None and preferred > 0 and H % preferred == 0 and W % preferred == 0:
        return preferred, preferred
    return H, W


def pick_head_count(channels: int, value_channels: int, head_dim: int | None = None,
                    max_head_dim: int = 32) -> int:
    """Largest head_dim <= 32 dividing the channels, with heads dividing values."""
    if head_dim is not None:
        if channels % head_dim:
            raise WindowError(f"head_dim={head_dim} does not divide channels={channels}")
        heads = channels // head_dim
        if value_channels % heads:
            raise WindowError(f"heads={heads} does not divide value channels={value_channels}")
        return heads
    for d in range(min(max_head_dim, channels), 0, -1):
        if channels % d == 0 and value_channels % (channels // d) == 0:
            return channels // d
    return channels  # unreachable: d=1 always divides


class WindowAttention(Module):
    """Shared-projection window attention with optional distant spanning.

    ordering 'post': values are projected to the expanded width, passed
    through GeLU when value_activation is set, then mixed by the attention
    map. ordering 'pre': the attention map (computed from q/k at the input
    width) mixes the raw input tokens first and the value projection runs
    afterwards; no value activation in this ordering.
    """

    def __init__(self, rng, channels: int, value_channels: int, *, heads: int,
                 ordering: str = "post", spanning: bool = True,
                 value_groups: int = 1, value_activation: bool = True):
        super().__init__()
        if ordering not in ("pre", "post"):
            raise ValueError(f"ordering must be 'pre' or 'post', got {ordering!r}")
        if channels % heads or value_channels % heads:
            raise WindowError(f"heads={heads} must divide {channels} and {value_channels}")
        self.channels = channels
        self.value_channels = value_channels
        self.heads = heads
        self.ordering = ordering
        self.spanning = spanning
        self.value_activation = value_activation and ordering == "post"
        self.query = Conv2d(rng, channels, channels, 1, padding=0)
        self.key = Conv2d(rng, channels, channels, 1, padding=0)
        self.value = Conv2d(rng, channels, value_channels, 1, padding=0, groups=value_groups)

    def _branch(self, q, k, val, B, H, W, h, w, partition, reverse):
        qp = partition(q, h, w)
        kp = partition(k, h, w)
        vp = partition(val, h, w)
        return reverse(attend(qp, kp, vp, self.heads), B, H, W, h, w)

    def forward(self, x: Tensor, window: tuple[int, int], pad: bool = False) -> Tensor:
        B, C, H, W = x.shape
        h, w = window
        Hp, Wp = H, W
        if pad and (H % h or W % w):
            Hp = -(-H // h) * h
            Wp = -(-W // w) * w
            x = T.pad2d(x, 0, Hp - H, 0, Wp - W)
        q = self.query(x)
        k = self.key(x)
        if self.ordering == "post":
            val = self.value(x)
            if self.value_activation:
                val = T.gelu(val)
        else:
            val = x  # mix raw tokens first, project afterwards
        out = self._branch(q, k, val, B, Hp, Wp, h, w, neighbor_partition, neighbor_reverse)
        if self.spanning:
            distant = self._branch(q, k, val, B, Hp, Wp, h, w, distant_partition, distant_reverse)
            out = T.scale(T.add(out, distant), 0.5)
        if self.ordering == "pre":
            out = self.value(out)
        if (Hp, Wp) != (H, W):
            out = T.crop2d(out, H, W)
        return out
