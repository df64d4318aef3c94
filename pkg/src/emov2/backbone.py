"""Four-stage classification backbone built from mobile blocks.

Strides 4/8/16/32. The stem is a 3x3 stride-2 conv to half the first stage
width, then a depthwise-separable stride-2 step to the full width. Stage
transitions happen in the first block of stages 2-4: stride-2 depthwise,
compact 3x3 kernel, attention off. Attention (post ordering, spanning,
5x5 local kernel) runs in the stride-1 blocks of stages 3-4. Head is
global average pooling plus one linear layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .blocks import BlockSpec, MobileBlock
from .layers import BatchNorm2d, Conv2d, Linear, Module, ModuleList, global_avg_pool
from .serialization import load_weights, save_weights

TRANSITION_KERNEL = 3  # stride-2 blocks keep the compact kernel


@dataclass(frozen=True)
class StageConfig:
    depth: int
    dim: int
    ratio: Fraction
    attention: bool = False
    spanning: bool = True
    window: int | None = 7
    drop_path: float = 0.0

    def validate(self, name: str):
        if self.depth < 1:
            raise ValueError(f"{name}: depth must be >= 1, got {self.depth}")
        if self.dim < 1:
            raise ValueError(f"{name}: dim must be >= 1, got {self.dim}")
        if self.ratio < 1:
            raise ValueError(f"{name}: exp_ratio must be >= 1, got {self.ratio}")
        if not 0.0 <= self.drop_path < 1.0:
            raise ValueError(f"{name}: drop_path must be in [0, 1), got {self.drop_path}")
        if self.window is not None and self.window < 1:
            raise ValueError(f"{name}: window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class BackboneConfig:
    stages: tuple[StageConfig, StageConfig, StageConfig, StageConfig]
    classes: int = 1000
    stem_width: int | None = None  # default: half the first stage width
    kernel: int = 5
    ordering: str = "post"

    def validate(self):
        if len(self.stages) != 4:
            raise ValueError(f"expected 4 stages, got {len(self.stages)}")
        for i, s in enumerate(self.stages, 1):
            s.validate(f"stage{i}")
        if self.classes < 2:
            raise ValueError(f"classes must be >= 2, got {self.classes}")
        if self.stem_width is not None and self.stem_width < 1:
            raise ValueError(f"stem width must be >= 1, got {self.stem_width}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")

    @property
    def stem_mid(self) -> int:
        return self.stem_width if self.stem_width is not None else max(1, self.stages[0].dim // 2)

    def block_specs(self) -> list[list[BlockSpec]]:
        """Expand the stage table into per-block specs (the single source of
        truth shared by the builder and the analytic cost model)."""
        self.validate()
        out = []
        in_ch = self.stages[0].dim
        for si, st in enumerate(self.stages):
            blocks = []
            for bi in range(st.depth):
                transition = bi == 0 and si > 0
                attention = st.attention and not transition
                blocks.append(BlockSpec(
                    in_ch=in_ch,
                    out_ch=st.dim,
                    ratio=st.ratio,
                    operator="attention_dwconv" if attention else "dwconv",
                    kernel=TRANSITION_KERNEL if transition else self.kernel,
                    stride=2 if transition else 1,
                    ordering=self.ordering,
                    spanning=st.spanning,
                    window=st.window,
                    drop_path=st.drop_path,
                ))
                in_ch = st.dim
            out.append(blocks)
        return out


def _preset(depths, dims, ratios):
    return BackboneConfig(stages=tuple(
        StageConfig(depth=d, dim=c, ratio=Fraction(r), attention=(i >= 2),
                    spanning=True, window=7, drop_path=0.05)
        for i, (d, c, r) in enumerate(zip(depths, dims, ratios))
    ))


PRESETS: dict[str, BackboneConfig] = {
    "emov2-1m":  _preset([2, 2, 8, 3],  [32, 48, 80, 180],   ["2", "5/2", "3", "7/2"]),
    "emov2-2m":  _preset([3, 3, 9, 3],  [32, 48, 120, 200],  ["2", "5/2", "3", "7/2"]),
    "emov2-5m":  _preset([3, 3, 9, 3],  [48, 72, 160, 288],  ["2", "3", "4", "4"]),
    "emov2-20m": _preset([3, 3, 13, 3], [64, 128, 320, 448], ["2", "3", "4", "4"]),
    "emov2-50m": _preset([5, 8, 20, 7], [64, 128, 384, 512], ["2", "3", "4", "4"]),
}


def preset_config(name: str) -> BackboneConfig:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; known presets: {known}")
    return PRESETS[name]


class Stem(Module):
    def __init__(self, rng, mid: int, out: int):
        super().__init__()
        self.conv1 = Conv2d(rng, 3, mid, 3, stride=2, padding=1)
        self.norm1 = BatchNorm2d(mid)
        self.conv2_dw = Conv2d(rng, mid, mid, 3, stride=2, padding=1, groups=mid)
        self.norm2 = BatchNorm2d(mid)
        self.conv2_pw = Conv2d(rng, mid, out, 1, padding=0)
        self.norm3 = BatchNorm2d(out)

    def forward(self, x: Tensor) -> Tensor:
        x = T.silu(self.norm1(self.conv1(x)))
        x = T.silu(self.norm2(self.conv2_dw(x)))
        return T.silu(self.norm3(self.conv2_pw(x)))


class Backbone(Module):
    def __init__(self, config: BackboneConfig, seed: int = 0):
        super().__init__()
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        self.stem = Stem(rng, config.stem_mid, config.stages[0].dim)
        self.stages = ModuleList(
            ModuleList(MobileBlock(rng, spec) for spec in stage)
            for stage in config.block_specs()
        )
        self.head = Linear(rng, config.stages[3].dim, config.classes)
        self.drop_rng = np.random.default_rng(seed + 1)

    @classmethod
    def from_preset(cls, name: str, seed: int = 0) -> "Backbone":
        return cls(preset_config(name), seed=seed)

    def reseed_drop_path(self, seed: int):
        self.drop_rng = np.random.default_rng(seed)

    def forward_features(self, x: Tensor, pad_windows: bool = False) -> list[Tensor]:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"expected [N,3,H,W] input, got {x.shape}")
        maps = []
        h = self.stem(x)
        for stage in self.stages:
            for block in stage:
                h = block(h, rng=self.drop_rng, pad_windows=pad_windows)
            maps.append(h)
        return maps

    def forward(self, x: Tensor, pad_windows: bool = False) -> Tensor:
        h = self.forward_features(x, pad_windows=pad_windows)[-1]
        return self.head(global_avg_pool(h))

    # -- checkpointing ----------------------------------------------------
    def save(self, path):
        save_weights(path, self.state_dict())

    def load(self, path):
        self.load_state_dict(load_weights(path))
