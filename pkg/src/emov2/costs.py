"""Analytic parameter, FLOP, and maximum-path-length accounting.

Conventions: FLOPs use the 2x multiply-accumulate convention plus 3 FLOPs
per softmax element; bias counts as one add per output element, tracked
separately. The `macs` fields carry plain multiply-accumulates (half the
2x figure, softmax excluded); published complexity tables for mobile
models quote this mult-add number, so headline comparisons use it.
Normalization and activation costs are excluded throughout.

Maximum path length is the worst-case number of layers information needs
to travel between two spatial positions: O(1) for global attention,
unbounded for window-local attention, 2W/(k-1) for a depthwise/standard
conv stack on a W-wide map, and 2W/(k-1+2w) when window attention and a
conv share each block.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .backbone import BackboneConfig, TRANSITION_KERNEL
from .blocks import BlockSpec
from .attention import pick_head_count, pick_window


# -- single-layer formulas -------------------------------------------------

def conv_params(cin: int, cout: int, k: int, groups: int = 1) -> int:
    """(C_in k^2 / G + 1) C_out; bias always present."""
    return (cin * k * k // groups + 1) * cout


def dwconv_params(ch: int, k: int) -> int:
    """(k^2 + 1) C."""
    return (k * k + 1) * ch


def norm_params(ch: int) -> int:
    return 2 * ch


def linear_params(fin: int, fout: int) -> int:
    return (fin + 1) * fout


def attention_params(ch: int, ratio=Fraction(1), value_groups: int = 1,
                     include_output: bool = False) -> int:
    """Q, K at the input width plus the expanded value projection.

    ratio 1, dense, with the output projection folded back in gives the
    classic 4(C+1)C of a full windowed attention module.
    """
    E = int(round(Fraction(ratio) * ch))
    total = 2 * (ch + 1) * ch + (ch // value_groups + 1) * E
    if include_output:
        total += (E + 1) * ch
    return total


def conv_flops(cin: int, cout: int, k: int, length_out: int, groups: int = 1) -> int:
    """(2 C_in k^2 / G) L C_out, L at the output resolution."""
    return 2 * cin * k * k // groups * cout * length_out


def dwconv_flops(ch: int, k: int, length_out: int) -> int:
    """(2 k^2) L C."""
    return 2 * k * k * ch * length_out


def linear_flops(fin: int, fout: int, batch: int = 1) -> int:
    return 2 * fin * fout * batch


def attention_flops(ch: int, length: int, window_tokens: int | None = None,
                    ratio=Fraction(1), spanning: bool = False,
                    include_output: bool = False, heads: int = 1) -> int:
    """Windowed attention FLOPs: 8C^2 L + 4CLl + 3Ll at ratio 1, dense.

    window_tokens None means global attention (l = L, the quadratic case).
    Spanning doubles the attention-map work but not the projections. The
    3 FLOPs/element softmax term scales with the head count; the published
    row is the single-head form.
    """
    l = length if window_tokens is None else window_tokens
    E = int(round(Fraction(ratio) * ch))
    proj = 2 * length * (2 * ch * ch + ch * E)  # q, k, v
    if include_output:
        proj += 2 * length * E * ch
    branches = 2 if spanning else 1
    scores = branches * 2 * ch * length * l  # q^T k
    mix = branches * 2 * E * length * l  # attention map times values
    soft = branches * 3 * heads * length * l
    return proj + scores + mix + soft


@dataclass(frozen=True)
class PathLength:
    """Maximum path length class; numeric when the geometry is bound."""

    kind: str  # 'const' | 'unbounded' | 'conv' | 'hybrid'
    value: float | None = None

    def __str__(self):
        if self.kind == "const":
            return "O(1)"
        if self.kind == "unbounded":
            return "O(inf)"
        if self.value is None:
            return "O(2W/(k-1))" if self.kind == "conv" else "O(2W/(k-1+2w))"
        return f"{self.value:.2f}"


def mpl_of(kind: str, *, width: int | None = None, kernel: int | None = None,
           window: int | None = None) -> PathLength:
    """Path-length class per layer kind.

    'attention' is the global form (O(1)); 'window_attention' never links
    windows, so alone it is unbounded; conv stacks need 2W/(k-1) layers;
    'hybrid' blocks (window attention + conv) need 2W/(k-1+2w).
    """
    if kind == "attention":
        return PathLength("const")
    if kind == "window_attention":
        return PathLength("unbounded")
    if kind in ("conv", "dwconv"):
        v = 2 * width / (kernel - 1) if width is not None and kernel else None
        return PathLength("conv", v)
    if kind == "hybrid":
        v = (2 * width / (kernel - 1 + 2 * window)
             if width is not None and kernel and window else None)
        return PathLength("hybrid", v)
    raise ValueError(f"no path-length class for kind {kind!r}")


# -- whole-model report ----------------------------------------------------

@dataclass
class CostRow:
    name: str
    kind: str
    params: int
    flops: int  # 2x convention, softmax included
    macs: int  # mult-adds, softmax excluded
    bias_adds: int
    mpl: str


@dataclass
class CostReport:
    rows: list[CostRow]
    resolution: int

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    @property
    def total_bias_adds(self) -> int:
        return sum(r.bias_adds for r in self.rows)

    def macs_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            out[r.kind] = out.get(r.kind, 0) + r.macs
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "kind", "params", "flops", "mpl"])
        for r in self.rows:
            writer.writerow([r.name, r.kind, r.params, r.flops, r.mpl])
        writer.writerow(["TOTAL", "", self.total_params, self.total_flops, ""])
        return buf.getvalue()


def _block_rows(name: str, spec: BlockSpec, H: int, W: int) -> tuple[list[CostRow], int, int]:
    """Rows for one block; returns (rows, H_out, W_out)."""
    rows = []
    E = spec.mid_ch
    Ho = H // spec.stride
    Wo = W // spec.stride
    L_in, L_out = H * W, Ho * Wo

    def row(suffix, kind, params, flops, macs, bias, mpl=""):
        rows.append(CostRow(f"{name}.{suffix}", kind, params, flops, macs, bias, mpl))

    if spec.has_attention:
        att_ch = E if spec.layout == "cascade" else E // 2
        heads = pick_head_count(spec.in_ch, att_ch, spec.head_dim)
        h, w = pick_window(H, W, spec.window)
        l = h * w
        branches = 2 if spec.spanning else 1
        row("norm", "norm", norm_params(spec.in_ch), 0, 0, 0)
        qk_p = conv_params(spec.in_ch, spec.in_ch, 1)
        qk_f = conv_flops(spec.in_ch, spec.in_ch, 1, L_in)
        row("query", "conv", qk_p, qk_f, qk_f // 2, L_in * spec.in_ch)
        row("key", "conv", qk_p, qk_f, qk_f // 2, L_in * spec.in_ch)
        v_p = conv_params(spec.in_ch, att_ch, 1, spec.value_groups)
        v_f = conv_flops(spec.in_ch, att_ch, 1, L_in, spec.value_groups)
        row("value", "conv", v_p, v_f, v_f // 2, L_in * att_ch)
        mix_ch = spec.in_ch if spec.ordering == "pre" else att_ch
        score_mac = branches * spec.in_ch * L_in * l
        mix_mac = branches * mix_ch * L_in * l
        soft = branches * 3 * heads * L_in * l
        mpl = "O(1)" if (h, w) == (H, W) else str(mpl_of("window_attention"))
        row("attention", "attention", 0, 2 * (score_mac + mix_mac) + soft,
            score_mac + mix_mac, 0, mpl)
        if spec.layout == "parallel":
            conv_ch = E - E // 2
            row("expand", "conv", conv_params(spec.in_ch, conv_ch, 1),
                conv_flops(spec.in_ch, conv_ch, 1, L_in),
                conv_flops(spec.in_ch, conv_ch, 1, L_in) // 2, L_in * conv_ch)
            row("local", "dwconv", dwconv_params(conv_ch, spec.kernel),
                dwconv_flops(conv_ch, spec.kernel, L_out),
                dwconv_flops(conv_ch, spec.kernel, L_out) // 2, L_out * conv_ch,
                str(mpl_of("dwconv", width=Ho, kernel=spec.kernel)))
            row("local_norm", "norm", norm_params(conv_ch), 0, 0, 0)
        elif spec.has_conv:
            row("local", "dwconv", dwconv_params(E, spec.kernel),
                dwconv_flops(E, spec.kernel, L_out),
                dwconv_flops(E, spec.kernel, L_out) // 2, L_out * E,
                str(mpl_of("dwconv", width=Ho, kernel=spec.kernel)))
            row("local_norm", "norm", norm_params(E), 0, 0, 0)
    else:
        row("norm", "norm", norm_params(spec.in_ch), 0, 0, 0)
        row("expand", "conv", conv_params(spec.in_ch, E, 1),
            conv_flops(spec.in_ch, E, 1, L_in),
            conv_flops(spec.in_ch, E, 1, L_in) // 2, L_in * E)
        if spec.has_conv:
            row("local", "dwconv", dwconv_params(E, spec.kernel),
                dwconv_flops(E, spec.kernel, L_out),
                dwconv_flops(E, spec.kernel, L_out) // 2, L_out * E,
                str(mpl_of("dwconv", width=Ho, kernel=spec.kernel)))
            row("local_norm", "norm", norm_params(E), 0, 0, 0)
    row("shrink", "conv", conv_params(E, spec.out_ch, 1),
        conv_flops(E, spec.out_ch, 1, L_out),
        conv_flops(E, spec.out_ch, 1, L_out) // 2, L_out * spec.out_ch)
    return rows, Ho, Wo


def model_report(config: BackboneConfig, resolution: int = 224) -> CostReport:
    """Per-layer analytic cost rows for a backbone at the given input size."""
    config.validate()
    if resolution % 4:
        raise ValueError(f"resolution must be divisible by 4, got {resolution}")
    rows: list[CostRow] = []
    mid, d1 = config.stem_mid, config.stages[0].dim

    def stem_conv(name, cin, cout, k, groups, H):
        f = conv_flops(cin, cout, k, H * H, groups)
        p = (conv_params(cin, cout, k, groups) if groups == 1 else dwconv_params(cout, k))
        kind = "dwconv" if groups > 1 else "conv"
        rows.append(CostRow(f"stem.{name}", kind, p, f, f // 2, H * H * cout,
                            str(mpl_of("dwconv" if groups > 1 else "conv", width=H, kernel=k)) if k > 1 else ""))
        rows.append(CostRow(f"stem.{name}_norm", "norm", norm_params(cout), 0, 0, 0, ""))

    H = resolution // 2
    stem_conv("conv1", 3, mid, 3, 1, H)
    H //= 2
    stem_conv("conv2_dw", mid, mid, 3, mid, H)
    stem_conv("conv2_pw", mid, d1, 1, 1, H)

    W = H
    for si, stage in enumerate(config.block_specs()):
        for bi, spec in enumerate(stage):
            block_rows, H, W = _block_rows(f"stage{si + 1}.block{bi + 1}", spec, H, W)
            rows.extend(block_rows)

    head_f = linear_flops(config.stages[3].dim, config.classes)
    rows.append(CostRow("head", "linear", linear_params(config.stages[3].dim, config.classes),
                        head_f, head_f // 2, config.classes, ""))
    return CostReport(rows, resolution)


def enumerate_model_params(model) -> int:
    """Independent parameter count: walks the live module tree."""
    return sum(p.size for _, p in model.named_parameters())


# -- reachability / effective receptive field ------------------------------

def _window_id_neighbor(H: int, W: int, h: int, w: int) -> np.ndarray:
    rows = np.arange(H)[:, None] // h
    cols = np.arange(W)[None, :] // w
    return (rows * (W // w) + cols).reshape(-1)


def _window_id_distant(H: int, W: int, h: int, w: int) -> np.ndarray:
    sh, sw = H // h, W // w
    rows = np.arange(H)[:, None] % sh
    cols = np.arange(W)[None, :] % sw
    return (rows * sw + cols).reshape(-1)


def _attend_step(reach: np.ndarray, window_id: np.ndarray) -> np.ndarray:
    """A source that touches any pixel of a window gains the whole window."""
    n_windows = int(window_id.max()) + 1
    member = np.zeros((reach.shape[1], n_windows), dtype=bool)
    member[np.arange(reach.shape[1]), window_id] = True
    touched = reach @ member  # [sources, windows]
    return reach | (touched @ member.T)


def _conv_step(reach: np.ndarray, H: int, W: int, k: int) -> np.ndarray:
    r = (k - 1) // 2
    grid = reach.reshape(-1, H, W)
    out = grid.copy()
    for du in range(-r, r + 1):
        for dv in range(-r, r + 1):
            if du == 0 and dv == 0:
                continue
            shifted = np.zeros_like(grid)
            su0, su1 = max(0, du), H + min(0, du)
            tu0, tu1 = max(0, -du), H + min(0, -du)
            sv0, sv1 = max(0, dv), W + min(0, dv)
            tv0, tv1 = max(0, -dv), W + min(0, -dv)
            shifted[:, tu0:tu1, tv0:tv1] = grid[:, su0:su1, sv0:sv1]
            out |= shifted
    return out.reshape(reach.shape[0], H * W)


LAYER_KINDS = ("dwconv", "neighbor", "distant", "spanning")


def reachability_step(reach: np.ndarray, layer: str, H: int, W: int,
                      window: int = 0, kernel: int = 3) -> np.ndarray:
    """One layer of boolean influence propagation on an [S, H*W] mask."""
    if layer == "dwconv":
        return _conv_step(reach, H, W, kernel)
    if layer == "neighbor":
        return _attend_step(reach, _window_id_neighbor(H, W, window, window))
    if layer == "distant":
        return _attend_step(reach, _window_id_distant(H, W, window, window))
    if layer == "spanning":
        r = _attend_step(reach, _window_id_neighbor(H, W, window, window))
        return r | _attend_step(reach, _window_id_distant(H, W, window, window))
    raise ValueError(f"unknown reachability layer {layer!r}; expected one of {LAYER_KINDS}")


@dataclass
class ReachResult:
    """Influence growth of a homogeneous layer stack on an H x W map."""

    layer: str
    H: int
    W: int
    coverage: list[float]  # mean fraction of the map reached after each layer
    center_maps: list[np.ndarray]  # [H, W] bool, influence of the center pixel
    layers_to_full: int | None  # None: never reached full coverage


def analyze_reachability(layer: str, H: int, W: int, depth: int,
                         window: int = 0, kernel: int = 3) -> ReachResult:
    if layer not in LAYER_KINDS:
        raise ValueError(f"unknown reachability layer {layer!r}; expected one of {LAYER_KINDS}")
    if layer != "dwconv":
        if window <= 0:
            raise ValueError(f"{layer} reachability needs a positive window, got {window}")
        if H % window or W % window:
            raise ValueError(f"window {window} does not divide map {H}x{W}")
    n = H * W
    reach = np.eye(n, dtype=bool)
    coverage = []
    center_maps = []
    layers_to_full = None
    center = (H // 2) * W + W // 2
    for d in range(1, depth + 1):
        reach = reachability_step(reach, layer, H, W, window, kernel)
        cov = float(reach.mean())
        coverage.append(cov)
        center_maps.append(reach[center].reshape(H, W).copy())
        if layers_to_full is None and cov == 1.0:
            layers_to_full = d
    return ReachResult(layer, H, W, coverage, center_maps, layers_to_full)
