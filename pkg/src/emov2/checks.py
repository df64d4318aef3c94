"""Self-verification suites behind the `check` CLI command.

Every check returns a CheckResult rather than raising, so one failure
never hides the rest. Detail strings always carry the shape and seed
of the exercised case; a FAIL line is therefore directly reproducible.
Suites are independent and safe to run concurrently.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import tensor as T
from .attention import (WindowAttention, attend, distant_partition,
                        distant_reverse, neighbor_partition, neighbor_reverse)
from .backbone import Backbone, preset_config
from .blocks import MobileBlock, spanning_hybrid_spec
from .configfile import ConfigError, emit_config, parse_config
from .costs import (analyze_reachability, attention_flops, dwconv_flops,
                    enumerate_model_params, model_report, mpl_of)
from .layers import BatchNorm2d, LayerNormTokens
from .serialization import load_weights, save_weights
from .tensor import FormatError, Tensor, grad_check, load_tensor, save_tensor
from .train import toy_config

GRAD_TOL = 1e-4
EQUIV_TOL = 1e-5

PARAM_TARGETS = {  # published model sizes in parameters
    "emov2-1m": 1.4e6,
    "emov2-2m": 2.3e6,
    "emov2-5m": 5.1e6,
    "emov2-20m": 20.1e6,
    "emov2-50m": 49.8e6,
}
MAC_TARGETS = {  # published 224x224 mult-add counts
    "emov2-1m": 285e6,
    "emov2-2m": 487e6,
    "emov2-5m": 1035e6,
    "emov2-20m": 4000e6,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return f"{word} {self.name}: {self.detail}" if self.detail else f"{word} {self.name}"


def _run(results, name, fn):
    try:
        passed, detail = fn()
    except Exception as e:
        passed, detail = False, f"raised {type(e).__name__}: {e}"
    results.append(CheckResult(name, passed, detail))


# -- gradient suite -------------------------------------------------------


def _weighted(out: Tensor, seed: int) -> Tensor:
    """Scalarize with a fixed random projection so no gradient direction hides."""
    proj = np.random.default_rng(seed).normal(size=out.shape)
    return (out * Tensor(proj)).sum()


def _grad_case(name, make, seed):
    def fn():
        f, x = make(np.random.default_rng(seed))
        err = grad_check(f, x)
        return err < GRAD_TOL, f"rel_err={err:.2e} shape={tuple(x.shape)} seed={seed}"

    return name, fn


def check_grads():
    """Finite-difference checks for every differentiable op and one full block."""
    cases = []

    def simple(name, build, shape, seed, shift=0.0):
        # build(rng) returns the unary op; any random constants it needs
        # are drawn inside build, once, so finite differencing sees a
        # fixed function
        def make(rng):
            x = Tensor(rng.normal(size=shape) + shift, requires_grad=True)
            g = build(rng)
            return (lambda t: _weighted(g(t), seed + 1)), x

        cases.append(_grad_case(name, make, seed))

    def plain(g):
        return lambda rng: g

    def with_const(op, const_shape, offset=0.0):
        def build(rng):
            c = Tensor(rng.normal(size=const_shape) + offset)
            return lambda t: op(t, c)

        return build

    simple("add-broadcast", with_const(lambda t, c: t + c, (2, 1, 4)), (2, 3, 4), 10)
    simple("mul-broadcast", with_const(lambda t, c: t * c, (1, 3, 1)), (2, 3, 4), 11)
    simple("div", with_const(lambda t, c: t / c, (2, 3, 4), offset=4.0), (2, 3, 4), 12)
    simple("sqrt", plain(T.sqrt), (3, 5), 13, shift=4.0)
    simple("silu", plain(T.silu), (3, 5), 14)
    simple("gelu", plain(T.gelu), (3, 5), 15)
    simple("sum-axis", plain(lambda t: t.sum(axis=1, keepdims=True)), (2, 3, 4), 16)
    simple("mean-all", plain(lambda t: t.mean().reshape(1)), (2, 3, 4), 17)
    simple("reshape-permute", plain(lambda t: t.reshape(3, 2, 4).permute(2, 0, 1)), (2, 3, 4), 18)
    simple("concat", with_const(lambda t, c: T.concat([t, t * c], axis=1), (2, 3, 4)),
           (2, 3, 4), 19)
    simple("pad-crop", plain(lambda t: T.crop2d(T.pad2d(t, 1, 2, 0, 1), 4, 4)), (1, 2, 3, 3), 20)
    simple("softmax", plain(lambda t: T.softmax(t, axis=-1)), (3, 7), 21)
    simple("log-softmax", plain(lambda t: T.log_softmax(t, axis=1)), (3, 7), 22)
    simple("matmul-left", with_const(lambda t, c: T.matmul(t, c), (2, 4, 5)), (2, 3, 4), 23)
    simple("matmul-right", with_const(lambda t, c: T.matmul(c, t), (2, 5, 3)), (2, 3, 4), 24)

    def make_linear_x(rng):
        w = Tensor(rng.normal(size=(3, 8)))
        b = Tensor(rng.normal(size=(3,)))
        x = Tensor(rng.normal(size=(5, 8)), requires_grad=True)
        return (lambda t: _weighted(T.linear(t, w, b), 31)), x

    cases.append(_grad_case("linear-input", make_linear_x, 30))

    def make_linear_w(rng):
        x = Tensor(rng.normal(size=(5, 8)))
        b = Tensor(rng.normal(size=(3,)))
        w = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
        return (lambda t: _weighted(T.linear(x, t, b), 33)), w

    cases.append(_grad_case("linear-weight", make_linear_w, 32))

    def conv_case(name, seed, x_shape, w_shape, stride, padding, groups, wrt):
        def make(rng):
            x = Tensor(rng.normal(size=x_shape), requires_grad=(wrt == "x"))
            w = Tensor(rng.normal(size=w_shape), requires_grad=(wrt == "w"))
            b = Tensor(rng.normal(size=(w_shape[0],)), requires_grad=(wrt == "b"))
            args = {"x": x, "w": w, "b": b}

            def f(t):
                args[wrt] = t
                out = T.conv2d(args["x"], args["w"], args["b"],
                               stride=stride, padding=padding, groups=groups)
                return _weighted(out, seed + 1)

            return f, args[wrt]

        cases.append(_grad_case(name, make, seed))

    conv_case("conv1x1-input", 40, (2, 4, 5, 5), (6, 4, 1, 1), 1, 0, 1, "x")
    conv_case("conv1x1-weight", 41, (2, 4, 5, 5), (6, 4, 1, 1), 1, 0, 1, "w")
    conv_case("conv3x3-input", 42, (1, 3, 6, 6), (4, 3, 3, 3), 1, 1, 1, "x")
    conv_case("conv3x3-weight", 43, (1, 3, 6, 6), (4, 3, 3, 3), 1, 1, 1, "w")
    conv_case("conv3x3-bias", 44, (1, 3, 6, 6), (4, 3, 3, 3), 1, 1, 1, "b")
    conv_case("dwconv-input", 45, (2, 4, 6, 6), (4, 1, 3, 3), 1, 1, 4, "x")
    conv_case("dwconv-weight", 46, (2, 4, 6, 6), (4, 1, 3, 3), 1, 1, 4, "w")
    conv_case("grouped-conv-input", 47, (1, 4, 5, 5), (6, 2, 3, 3), 1, 1, 2, "x")
    conv_case("strided-conv-input", 48, (1, 3, 8, 8), (4, 3, 3, 3), 2, 1, 1, "x")
    conv_case("strided-dwconv-input", 49, (1, 4, 8, 8), (4, 1, 5, 5), 2, 2, 4, "x")

    def make_bn(rng):
        bn = BatchNorm2d(3)
        x = Tensor(rng.normal(size=(2, 3, 4, 4)), requires_grad=True)
        return (lambda t: _weighted(bn(t), 51)), x

    cases.append(_grad_case("batchnorm-train", make_bn, 50))

    def make_ln(rng):
        ln = LayerNormTokens(6)
        x = Tensor(rng.normal(size=(2, 6, 3, 3)), requires_grad=True)
        return (lambda t: _weighted(ln(t), 53)), x

    cases.append(_grad_case("layernorm-tokens", make_ln, 52))

    def make_attention(rng):
        att = WindowAttention(rng, 4, 8, heads=2)
        att.eval()
        x = Tensor(rng.normal(size=(1, 4, 4, 4)), requires_grad=True)
        return (lambda t: _weighted(att(t, (2, 2)), 55)), x

    cases.append(_grad_case("window-attention", make_attention, 54))

    def make_block(rng):
        block = MobileBlock(rng, spanning_hybrid_spec(8, Fraction(2)))
        block.eval()
        x = Tensor(rng.normal(size=(1, 8, 8, 8)), requires_grad=True)
        return (lambda t: _weighted(block(t), 57)), x

    cases.append(_grad_case("spanning-block", make_block, 56))

    results = []
    for name, fn in cases:
        _run(results, f"grads/{name}", fn)
    return results


# -- partition suite ------------------------------------------------------

PARTITION_SHAPES = ((2, 3, 8, 12, 4, 3), (1, 5, 6, 6, 2, 2), (2, 4, 14, 14, 7, 7))


def check_partition():
    results = []

    def roundtrip(kind, part, rev, B, C, H, W, h, w, seed):
        def fn():
            x = np.random.default_rng(seed).normal(size=(B, C, H, W))
            back = rev(part(Tensor(x), h, w), B, H, W, h, w)
            ok = np.array_equal(back.data, x)
            return ok, f"shape={(B, C, H, W)} window={(h, w)} seed={seed}"

        _run(results, f"partition/{kind}-roundtrip-{H}x{W}w{h}x{w}", fn)

    for i, (B, C, H, W, h, w) in enumerate(PARTITION_SHAPES):
        roundtrip("neighbor", neighbor_partition, neighbor_reverse, B, C, H, W, h, w, 100 + i)
        roundtrip("distant", distant_partition, distant_reverse, B, C, H, W, h, w, 110 + i)

    def neighbor_index():
        B, C, H, W, h, w = 2, 3, 8, 12, 4, 3
        seed = 120
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(B, C, H, W))
        part = neighbor_partition(Tensor(x), h, w).data
        nw = W // w
        for _ in range(50):
            bi, c = rng.integers(B), rng.integers(C)
            a, b = rng.integers(H // h), rng.integers(nw)
            p, q = rng.integers(h), rng.integers(w)
            got = part[bi * (H // h) * nw + a * nw + b, c, p * w + q]
            want = x[bi, c, a * h + p, b * w + q]
            if got != want:
                return False, f"window=({a},{b}) slot=({p},{q}) seed={seed}"
        return True, f"shape={(B, C, H, W)} window={(h, w)} seed={seed}"

    _run(results, "partition/neighbor-index-map", neighbor_index)

    def distant_index():
        B, C, H, W, h, w = 2, 3, 8, 12, 4, 3
        seed = 121
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(B, C, H, W))
        part = distant_partition(Tensor(x), h, w).data
        sh, sw = H // h, W // w
        for _ in range(50):
            bi, c = rng.integers(B), rng.integers(C)
            u, v = rng.integers(sh), rng.integers(sw)
            p, q = rng.integers(h), rng.integers(w)
            got = part[bi * sh * sw + u * sw + v, c, p * w + q]
            want = x[bi, c, u + p * sh, v + q * sw]
            if got != want:
                return False, f"window=({u},{v}) slot=({p},{q}) seed={seed}"
        return True, f"shape={(B, C, H, W)} window={(h, w)} seed={seed}"

    _run(results, "partition/distant-index-map", distant_index)

    def uniform_attention():
        seed = 122
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(3, 8, 6))
        zeros = Tensor(np.zeros((3, 4, 6)))
        out = attend(zeros, zeros, Tensor(v), heads=2).data
        want = np.broadcast_to(v.mean(axis=2, keepdims=True), v.shape)
        err = float(np.abs(out - want).max())
        return err < 1e-12, f"max_err={err:.2e} shape={v.shape} seed={seed}"

    _run(results, "partition/uniform-qk-averages-values", uniform_attention)

    return results


# -- ordering equivalence suite -------------------------------------------


def _paired_attention(seed, *, spanning, value_activation):
    """pre and post modules with identical projection weights."""
    rng = np.random.default_rng(seed)
    post = WindowAttention(rng, 8, 16, heads=2, ordering="post", spanning=spanning,
                           value_groups=2, value_activation=value_activation)
    pre = WindowAttention(np.random.default_rng(seed + 1), 8, 16, heads=2, ordering="pre",
                          spanning=spanning, value_groups=2, value_activation=False)
    pre.load_state_dict(post.state_dict())
    post.eval()
    pre.eval()
    return post, pre


def check_equivalence():
    results = []

    def case(name, seed, spanning, value_activation, expect_equal):
        def fn():
            post, pre = _paired_attention(seed, spanning=spanning,
                                          value_activation=value_activation)
            x = Tensor(np.random.default_rng(seed + 2).normal(size=(2, 8, 8, 8)))
            a = post(x, (4, 4)).data
            b = pre(x, (4, 4)).data
            rel = float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))
            ok = (rel < EQUIV_TOL) if expect_equal else (rel > 1e-3)
            side = "<" if expect_equal else ">"
            tol = EQUIV_TOL if expect_equal else 1e-3
            return ok, f"rel={rel:.2e} (want {side} {tol:g}) shape=(2, 8, 8, 8) seed={seed}"

        _run(results, f"equivalence/{name}", fn)

    case("pre-vs-post-neighbor", 200, False, False, True)
    case("pre-vs-post-spanning", 201, True, False, True)
    case("value-activation-breaks-it", 202, True, True, False)

    def grouped_value_required():
        seed = 203
        rng = np.random.default_rng(seed)
        post = WindowAttention(rng, 8, 16, heads=2, ordering="post", spanning=False,
                               value_groups=1, value_activation=False)
        # sharpen the attention map so the heads differ; near-uniform
        # softmax would mask the non-commutation
        post.query.weight.data *= 8.0
        post.key.weight.data *= 8.0
        pre = WindowAttention(np.random.default_rng(seed + 1), 8, 16, heads=2,
                              ordering="pre", spanning=False, value_groups=1,
                              value_activation=False)
        pre.load_state_dict(post.state_dict())
        post.eval()
        pre.eval()
        x = Tensor(np.random.default_rng(seed + 2).normal(size=(2, 8, 8, 8)))
        rel = float(np.abs(post(x, (4, 4)).data - pre(x, (4, 4)).data).max())
        # dense value mixing does not commute with per-head attention
        return rel > 1e-3, f"rel={rel:.2e} (want > 1e-3) shape=(2, 8, 8, 8) seed={seed}"

    _run(results, "equivalence/dense-value-breaks-it", grouped_value_required)

    return results


# -- cost-model suite -----------------------------------------------------


def check_cost():
    results = []

    def dwconv_spot():
        got = dwconv_flops(48, 5, 56 * 56)
        return got == 7_526_400, f"dwconv_flops(48,5,3136)={got} want 7526400"

    _run(results, "cost/dwconv-flop-formula", dwconv_spot)

    def attention_spot():
        got = attention_flops(160, 196, window_tokens=49, include_output=True)
        return got == 46_316_172, f"attention_flops(160,196,l=49)={got} want 46316172"

    _run(results, "cost/attention-flop-formula", attention_spot)

    for preset, target in PARAM_TARGETS.items():
        def fn(preset=preset, target=target):
            got = model_report(preset_config(preset)).total_params
            rel = (got - target) / target
            return abs(rel) <= 0.05, f"params={got} target={target:.0f} rel={rel:+.2%}"

        _run(results, f"cost/params-band-{preset}", fn)

    for preset, target in MAC_TARGETS.items():
        def fn(preset=preset, target=target):
            got = model_report(preset_config(preset)).total_macs
            rel = (got - target) / target
            return abs(rel) <= 0.10, f"mult-adds={got} target={target:.0f} rel={rel:+.2%}"

        _run(results, f"cost/macs-band-{preset}", fn)

    def flops_identity():
        # bias adds are tracked but excluded from the doubled figure; the
        # only flops beyond 2x macs are the per-element softmax terms
        rep = model_report(preset_config("emov2-5m"))
        for r in rep.rows:
            surplus = r.flops - 2 * r.macs
            if r.kind == "attention":
                if surplus <= 0 or surplus % 3:
                    return False, f"row {r.name}: softmax surplus {surplus}"
            elif surplus != 0:
                return False, f"row {r.name}: flops {r.flops} != 2*macs {2 * r.macs}"
        return True, f"{len(rep.rows)} rows satisfy the convention"

    _run(results, "cost/flops-macs-identity", flops_identity)

    def live_params():
        cfg = preset_config("emov2-1m")
        model = Backbone(cfg, seed=0)
        live = enumerate_model_params(model)
        analytic = model_report(cfg).total_params
        return live == analytic, f"live={live} analytic={analytic} (emov2-1m seed=0)"

    _run(results, "cost/analytic-matches-live-model", live_params)

    def csv_totals():
        rep = model_report(preset_config("emov2-1m"))
        text = rep.to_csv()
        lines = [ln for ln in text.strip().splitlines() if ln]
        header, body, total = lines[0], lines[1:-1], lines[-1]
        if header != "name,kind,params,flops,mpl":
            return False, f"header={header!r}"
        psum = sum(int(ln.split(",")[2]) for ln in body)
        fsum = sum(int(ln.split(",")[3]) for ln in body)
        tp, tf = int(total.split(",")[2]), int(total.split(",")[3])
        ok = total.startswith("TOTAL,") and psum == tp and fsum == tf
        return ok, f"rows={len(body)} params={psum}/{tp} flops={fsum}/{tf}"

    _run(results, "cost/csv-total-row-consistent", csv_totals)

    def conv_quadratic():
        cfg = preset_config("emov2-1m")
        cfg = replace(cfg, stages=tuple(replace(s, attention=False) for s in cfg.stages))
        lo = model_report(cfg, resolution=224).macs_by_kind()
        hi = model_report(cfg, resolution=448).macs_by_kind()
        lo_conv = lo.get("conv", 0) + lo.get("dwconv", 0)
        hi_conv = hi.get("conv", 0) + hi.get("dwconv", 0)
        return hi_conv == 4 * lo_conv, f"224:{lo_conv} 448:{hi_conv}"

    _run(results, "cost/conv-flops-quadratic-in-resolution", conv_quadratic)

    def mpl_strings():
        checks = [
            (str(mpl_of("attention")), "O(1)"),
            (str(mpl_of("window_attention")), "O(inf)"),
            (str(mpl_of("dwconv")), "O(2W/(k-1))"),
            (str(mpl_of("hybrid")), "O(2W/(k-1+2w))"),
            (str(mpl_of("dwconv", width=112, kernel=5)), "56.00"),
            (str(mpl_of("hybrid", width=56, kernel=5, window=7)), "6.22"),
        ]
        bad = [f"{got!r} != {want!r}" for got, want in checks if got != want]
        return not bad, "; ".join(bad) if bad else "6 forms formatted"

    _run(results, "cost/path-length-classes", mpl_strings)

    return results


# -- receptive-field suite ------------------------------------------------


def check_erf():
    results = []

    def dwconv_patch():
        res = analyze_reachability("dwconv", 9, 9, depth=1, kernel=3)
        got = int(res.center_maps[0].sum())
        return got == 9, f"center reaches {got} pixels, want 9 (map 9x9 k=3)"

    _run(results, "erf/dwconv-k3-reaches-3x3", dwconv_patch)

    def neighbor_plateau():
        res = analyze_reachability("neighbor", 16, 16, depth=3, window=4)
        want = 1.0 / 16.0
        flat = all(abs(c - want) < 1e-12 for c in res.coverage)
        return flat and res.layers_to_full is None, \
            f"coverage={[round(c, 4) for c in res.coverage]} want plateau at {want}"

    _run(results, "erf/neighbor-only-plateaus", neighbor_plateau)

    def distant_plateau():
        res = analyze_reachability("distant", 16, 16, depth=3, window=4)
        want = 1.0 / 16.0
        flat = all(abs(c - want) < 1e-12 for c in res.coverage)
        return flat and res.layers_to_full is None, \
            f"coverage={[round(c, 4) for c in res.coverage]} want plateau at {want}"

    _run(results, "erf/distant-only-plateaus", distant_plateau)

    def spanning_full():
        res = analyze_reachability("spanning", 16, 16, depth=3, window=4)
        return res.layers_to_full == 2, \
            f"layers_to_full={res.layers_to_full} coverage={[round(c, 4) for c in res.coverage]}"

    _run(results, "erf/spanning-full-in-two-layers", spanning_full)

    def dwconv_monotone():
        res = analyze_reachability("dwconv", 8, 8, depth=8, kernel=3)
        mono = all(b > a for a, b in zip(res.coverage, res.coverage[1:])
                   if a < 1.0) and res.coverage[-1] == 1.0
        return mono and res.layers_to_full == 7, \
            f"layers_to_full={res.layers_to_full} (8x8 k=3 wants 7)"

    _run(results, "erf/dwconv-growth-monotone", dwconv_monotone)

    return results


# -- serialization suite --------------------------------------------------


def check_serialization():
    results = []

    def tensor_roundtrip():
        seed = 300
        rng = np.random.default_rng(seed)
        with tempfile.TemporaryDirectory() as d:
            for i, arr in enumerate([
                rng.normal(size=(3, 4, 5)),
                rng.normal(size=(7,)).astype(np.float32),
                np.float64(rng.normal()).reshape(()),
            ]):
                path = os.path.join(d, f"t{i}.emot")
                save_tensor(path, arr)
                back = load_tensor(path)
                if back.dtype != arr.dtype or not np.array_equal(back, arr):
                    return False, f"case {i} shape={arr.shape} dtype={arr.dtype} seed={seed}"
        return True, f"3 arrays bit-exact seed={seed}"

    _run(results, "serialization/tensor-roundtrip", tensor_roundtrip)

    def tensor_truncation():
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "t.emot")
            save_tensor(path, np.zeros((4, 4)))
            raw = open(path, "rb").read()
            open(path, "wb").write(raw[:-8])
            try:
                load_tensor(path)
            except FormatError:
                return True, "truncated file rejected"
            return False, "truncated file loaded silently"

    _run(results, "serialization/tensor-truncation-detected", tensor_truncation)

    def weights_roundtrip():
        seed = 301
        block = MobileBlock(np.random.default_rng(seed), spanning_hybrid_spec(8, Fraction(2)))
        state = block.state_dict()
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "w.emow")
            save_weights(path, state)
            back = load_weights(path)
        ok = set(back) == set(state) and all(np.array_equal(back[k], state[k]) for k in state)
        return ok, f"{len(state)} tensors bit-exact seed={seed}"

    _run(results, "serialization/weights-roundtrip", weights_roundtrip)

    def model_roundtrip():
        seed = 302
        model = Backbone(toy_config(), seed=seed)
        model.eval()
        x = Tensor(np.random.default_rng(seed + 1).normal(size=(1, 3, 32, 32)))
        want = model(x).data
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "m.emow")
            model.save(path)
            other = Backbone(toy_config(), seed=seed + 2)
            other.load(path)
        other.eval()
        got = other(x).data
        return np.array_equal(got, want), f"forward bit-identical after reload, seed={seed}"

    _run(results, "serialization/model-forward-roundtrip", model_roundtrip)

    def missing_key_named():
        seed = 303
        block = MobileBlock(np.random.default_rng(seed), spanning_hybrid_spec(8, Fraction(2)))
        state = block.state_dict()
        victim = sorted(state)[0]
        state[victim + ".renamed"] = state.pop(victim)
        try:
            block.load_state_dict(state)
        except (KeyError, ValueError) as e:
            named = victim in str(e)
            return named, f"error names {victim!r}: {named}"
        return False, "renamed key accepted silently"

    _run(results, "serialization/missing-key-named", missing_key_named)

    return results


# -- config suite ---------------------------------------------------------


def check_config():
    results = []

    for preset in PARAM_TARGETS:
        def fn(preset=preset):
            cfg = preset_config(preset)
            text = emit_config(cfg)
            again = parse_config(text)
            ok = again == cfg and emit_config(again) == text
            return ok, f"{len(text)} chars, parse-emit fixed point"

        _run(results, f"config/roundtrip-{preset}", fn)

    def decimal_ratio():
        text = emit_config(preset_config("emov2-1m")).replace("5/2", "2.5")
        cfg = parse_config(text)
        got = cfg.stages[1].ratio
        return got == Fraction(5, 2), f"'2.5' parsed as {got}"

    _run(results, "config/decimal-ratio-exact", decimal_ratio)

    def errors_name_offender():
        text = emit_config(preset_config("emov2-5m"))
        probes = [
            (text.replace("depth = 9", "depth = 9\nbogus = 1", 1), "bogus"),
            (text.replace("[stage3]", "[stage3x]"), "stage3x"),
            (text.replace("exp_ratio = 4", "exp_ratio = 0"), "exp_ratio"),
        ]
        for src, token in probes:
            try:
                parse_config(src)
            except ConfigError as e:
                if token not in str(e):
                    return False, f"error for {token!r} reads {e}"
            else:
                return False, f"bad config with {token!r} accepted"
        return True, "3 malformed configs rejected by name"

    _run(results, "config/errors-name-offender", errors_name_offender)

    return results


SUITES = {
    "grads": check_grads,
    "partition": check_partition,
    "equivalence": check_equivalence,
    "cost": check_cost,
    "erf": check_erf,
    "serialization": check_serialization,
    "config": check_config,
}
SUITE_ORDER = tuple(SUITES)


def run_suite(name: str):
    """Results for one named suite, or for every suite in order via 'all'."""
    if name == "all":
        out = []
        for key in SUITE_ORDER:
            out.extend(SUITES[key]())
        return out
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {('all',) + SUITE_ORDER}")
    return SUITES[name]()
