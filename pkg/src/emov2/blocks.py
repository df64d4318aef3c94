"""Inverted-residual mobile blocks with optional windowed attention.

One template: expand to ratio * out_ch channels, apply a spatial mixer,
project back, add the shortcut when shapes allow. The mixer selects the
block family:

* identity       - pure MLP over channels (transformer FFN shape)
* dwconv         - depthwise conv: the classic inverted residual
* attention      - window attention only (transformer attention shape)
* attention_dwconv - window attention followed by depthwise conv; the
  hybrid used by the backbone presets

Conv sub-paths carry BatchNorm + SiLU; attention sub-paths carry LayerNorm
(+ GeLU on values in post ordering). Expansion order is norm, project,
activate; the shrink projection is bare. The residual is active only at
stride 1 with matching channel counts, scaled by stochastic depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .attention import WindowAttention, pick_head_count, pick_window
from .layers import BatchNorm2d, Conv2d, LayerNormTokens, Module, drop_path

OPERATORS = ("identity", "dwconv", "attention", "attention_dwconv")
LAYOUTS = ("cascade", "parallel")


@dataclass(frozen=True)
class BlockSpec:
    in_ch: int
    out_ch: int
    ratio: Fraction = Fraction(4)
    operator: str = "dwconv"
    kernel: int = 5
    stride: int = 1
    ordering: str = "post"
    spanning: bool = True
    window: int | None = 7
    head_dim: int | None = None
    value_groups: int = 1
    value_activation: bool = True
    layout: str = "cascade"
    drop_path: float = 0.0

    @property
    def mid_ch(self) -> int:
        return int(round(self.ratio * self.out_ch))

    @property
    def has_attention(self) -> bool:
        return self.operator in ("attention", "attention_dwconv")

    @property
    def has_conv(self) -> bool:
        return self.operator in ("dwconv", "attention_dwconv")

    @property
    def residual(self) -> bool:
        return self.stride == 1 and self.in_ch == self.out_ch

    def validate(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.ratio < 1:
            raise ValueError(f"expansion ratio must be >= 1, got {self.ratio}")
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if self.stride == 2 and not self.has_conv:
            raise ValueError(f"stride 2 requires a depthwise conv, operator is {self.operator!r}")
        if self.layout == "parallel":
            if self.operator != "attention_dwconv":
                raise ValueError("parallel layout requires operator 'attention_dwconv'")
            if self.stride != 1:
                # branch resolutions would differ at the concat
                raise ValueError("parallel layout requires stride 1")
        if self.mid_ch <= 0:
            raise ValueError(f"expanded width {self.mid_ch} must be positive")


def ffn_spec(dim: int, ratio=Fraction(4), **kw) -> BlockSpec:
    return BlockSpec(dim, dim, Fraction(ratio), operator="identity", **kw)


def attention_spec(dim: int, *, window: int | None = None, spanning: bool = False,
                   ordering: str = "post", **kw) -> BlockSpec:
    """Ratio-1 pure attention block (global when window is None)."""
    return BlockSpec(dim, dim, Fraction(1), operator="attention", window=window,
                     spanning=spanning, ordering=ordering, **kw)


def inverted_residual_spec(in_ch: int, out_ch: int, ratio, kernel: int = 3,
                           stride: int = 1, **kw) -> BlockSpec:
    return BlockSpec(in_ch, out_ch, Fraction(ratio), operator="dwconv",
                     kernel=kernel, stride=stride, **kw)


def hybrid_spec(dim: int, ratio, *, kernel: int = 3, window: int | None = 7, **kw) -> BlockSpec:
    """Pre-ordering hybrid: attention mixes unexpanded tokens, then conv."""
    return BlockSpec(dim, dim, Fraction(ratio), operator="attention_dwconv",
                     kernel=kernel, window=window, ordering="pre", spanning=False,
                     value_activation=False, **kw)


def spanning_hybrid_spec(dim: int, ratio, *, kernel: int = 5, window: int | None = 7, **kw) -> BlockSpec:
    """Post-ordering hybrid with distant spanning and GeLU on values."""
    return BlockSpec(dim, dim, Fraction(ratio), operator="attention_dwconv",
                     kernel=kernel, window=window, ordering="post", spanning=True,
                     value_activation=True, **kw)


class MobileBlock(Module):
    def __init__(self, rng, spec: BlockSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        E = spec.mid_ch
        if spec.has_attention:
            att_ch = E if spec.layout == "cascade" else E // 2
            self.heads = pick_head_count(spec.in_ch, att_ch, spec.head_dim)
            self.norm = LayerNormTokens(spec.in_ch)
            self.attention = WindowAttention(
                rng, spec.in_ch, att_ch, heads=self.heads, ordering=spec.ordering,
                spanning=spec.spanning, value_groups=spec.value_groups,
                value_activation=spec.value_activation,
            )
            if spec.layout == "parallel":
                conv_ch = E - E // 2
                self.expand = Conv2d(rng, spec.in_ch, conv_ch, 1, padding=0)
                self.local = Conv2d(rng, conv_ch, conv_ch, spec.kernel,
                                    stride=spec.stride, groups=conv_ch)
                self.local_norm = BatchNorm2d(conv_ch)
            elif spec.has_conv:
                self.local = Conv2d(rng, E, E, spec.kernel, stride=spec.stride, groups=E)
                self.local_norm = BatchNorm2d(E)
        else:
            self.norm = BatchNorm2d(spec.in_ch)
            self.expand = Conv2d(rng, spec.in_ch, E, 1, padding=0)
            if spec.has_conv:
                self.local = Conv2d(rng, E, E, spec.kernel, stride=spec.stride, groups=E)
                self.local_norm = BatchNorm2d(E)
        self.shrink = Conv2d(rng, E, spec.out_ch, 1, padding=0)

    def forward(self, x: Tensor, rng: np.random.Generator | None = None,
                pad_windows: bool = False) -> Tensor:
        spec = self.spec
        shortcut = x
        h = self.norm(x)
        if spec.has_attention:
            H, W = x.shape[2], x.shape[3]
            window = pick_window(H, W, spec.window) if not pad_windows else (
                (spec.window, spec.window) if spec.window else (H, W))
            e = self.attention(h, window, pad=pad_windows)
            if spec.layout == "parallel":
                c = T.silu(self.expand(h))
                c = T.silu(self.local_norm(self.local(c)))
                e = T.concat([e, c], axis=1)
            elif spec.has_conv:
                e = T.silu(self.local_norm(self.local(e)))
        else:
            e = T.silu(self.expand(h))
            if spec.has_conv:
                e = T.silu(self.local_norm(self.local(e)))
        out = self.shrink(e)
        if spec.residual:
            if spec.drop_path > 0.0 and self.training:
                if rng is None:
                    raise ValueError("drop_path active: forward needs an rng")
                out = drop_path(out, spec.drop_path, self.training, rng)
            out = T.add(shortcut, out)
        return out
