"""Analytic cost model: closed-form counts, traced agreement, reachability."""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from emov2.backbone import Backbone, preset_config
from emov2.blocks import MobileBlock, spanning_hybrid_spec
from emov2.costs import (CostReport, LAYER_KINDS, analyze_reachability,
                         attention_flops, attention_params, conv_flops,
                         conv_params, dwconv_flops, dwconv_params,
                         linear_flops, linear_params, model_report, mpl_of,
                         norm_params, reachability_step)
from emov2.tensor import Tensor, trace_flops
from emov2.train import toy_config

MAC_TARGETS = {
    "emov2-1m": 285e6,
    "emov2-2m": 487e6,
    "emov2-5m": 1035e6,
    "emov2-20m": 4000e6,
}


class TestClosedForms:
    def test_conv_params(self):
        assert conv_params(16, 32, 3) == (16 * 9 + 1) * 32
        assert conv_params(16, 32, 1) == 17 * 32
        assert conv_params(16, 32, 3, groups=4) == (4 * 9 + 1) * 32

    def test_dwconv_params(self):
        assert dwconv_params(48, 5) == 26 * 48

    def test_attention_params_full_module_identity(self):
        """Ratio 1, dense, with output projection: the classic 4(C+1)C."""
        C = 64
        assert attention_params(C, include_output=True) == 4 * (C + 1) * C

    def test_attention_params_grouped_values(self):
        assert attention_params(8, ratio=Fraction(2), value_groups=2) == \
            2 * 9 * 8 + (4 + 1) * 16

    def test_linear_params(self):
        assert linear_params(180, 1000) == 181 * 1000

    def test_conv_flops_per_position(self):
        # 2 * Cin * k^2 * Cout per output position
        assert conv_flops(16, 32, 3, 10) == 2 * 16 * 9 * 32 * 10

    def test_dwconv_flop_table_row(self):
        """Depthwise cost 2 k^2 L C at the published spot geometry."""
        assert dwconv_flops(48, 5, 56 * 56) == 7_526_400

    def test_attention_flop_table_row(self):
        """Windowed attention 8C^2L + 4CLl + 3Ll at the published geometry."""
        assert attention_flops(160, 196, window_tokens=49, include_output=True) == 46_316_172

    def test_attention_global_quadratic(self):
        C, L = 32, 49
        got = attention_flops(C, L)
        assert got == 6 * C * C * L + 4 * C * L * L + 3 * L * L

    def test_spanning_doubles_mixing_not_projections(self):
        C, L, l = 32, 64, 16
        mono = attention_flops(C, L, window_tokens=l)
        span = attention_flops(C, L, window_tokens=l, spanning=True)
        assert span - mono == 4 * C * L * l + 3 * L * l

    def test_linear_flops(self):
        assert linear_flops(180, 1000) == 2 * 180 * 1000


class TestPathLength:
    def test_symbolic_classes(self):
        assert str(mpl_of("attention")) == "O(1)"
        assert str(mpl_of("window_attention")) == "O(inf)"
        assert str(mpl_of("conv")) == "O(2W/(k-1))"
        assert str(mpl_of("hybrid")) == "O(2W/(k-1+2w))"

    def test_numeric_binding(self):
        assert str(mpl_of("dwconv", width=112, kernel=5)) == "56.00"
        assert str(mpl_of("hybrid", width=56, kernel=5, window=7)) == "6.22"

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            mpl_of("pooling")


class TestModelReport:
    @pytest.mark.parametrize("name,target", sorted(MAC_TARGETS.items()))
    def test_mult_adds_within_published_band(self, name, target):
        got = model_report(preset_config(name)).total_macs
        assert abs(got - target) / target <= 0.10

    def test_rows_cover_stem_stages_head(self):
        rep = model_report(preset_config("emov2-1m"))
        names = [r.name for r in rep.rows]
        assert names[0].startswith("stem.")
        assert names[-1] == "head"
        assert any(n.startswith("stage3.block2.attention") for n in names)

    def test_csv_shape(self):
        rep = model_report(preset_config("emov2-1m"))
        lines = rep.to_csv().strip().splitlines()
        assert lines[0] == "name,kind,params,flops,mpl"
        assert lines[-1].startswith("TOTAL,")
        assert len(lines) == len(rep.rows) + 2

    def test_resolution_validated(self):
        with pytest.raises(ValueError):
            model_report(preset_config("emov2-1m"), resolution=225)

    def test_attention_row_only_in_attention_stages(self):
        rep = model_report(preset_config("emov2-5m"))
        att_rows = [r.name for r in rep.rows if r.kind == "attention"]
        assert att_rows and all(n.startswith(("stage3.", "stage4.")) for n in att_rows)
        # transitions never carry attention
        assert not any(".block1.attention" in n for n in att_rows)

    def test_flops_double_macs_plus_softmax(self):
        rep = model_report(preset_config("emov2-2m"))
        for r in rep.rows:
            if r.kind == "attention":
                assert r.flops > 2 * r.macs and (r.flops - 2 * r.macs) % 3 == 0
            else:
                assert r.flops == 2 * r.macs


@pytest.fixture(scope="module")
def traced():
    config = toy_config()
    model = Backbone(config, seed=0)
    model.eval()
    x = Tensor(np.random.default_rng(1).normal(size=(1, 3, 32, 32)))
    with trace_flops() as tr:
        model(x)
    return tr, model_report(config, resolution=32)


class TestTracedAgreement:
    """The analytic table predicts the executed multiply counts exactly."""

    def by_kind(self, report, kind):
        return sum(r.macs for r in report.rows if r.kind == kind)

    def test_conv_macs_exact(self, traced):
        tr, rep = traced
        assert tr.macs.get("conv", 0) == self.by_kind(rep, "conv")

    def test_dwconv_macs_exact(self, traced):
        tr, rep = traced
        assert tr.macs.get("dwconv", 0) == self.by_kind(rep, "dwconv")

    def test_linear_macs_exact(self, traced):
        tr, rep = traced
        assert tr.macs.get("linear", 0) == self.by_kind(rep, "linear")

    def test_attention_macs_exact(self, traced):
        tr, rep = traced
        assert tr.macs.get("matmul", 0) == self.by_kind(rep, "attention")

    def test_softmax_elements_exact(self, traced):
        tr, rep = traced
        analytic = sum((r.flops - 2 * r.macs) // 3
                       for r in rep.rows if r.kind == "attention")
        assert tr.softmax_elements == analytic

    def test_bias_adds_exact(self, traced):
        tr, rep = traced
        assert tr.bias_adds == sum(r.bias_adds for r in rep.rows)


class TestSpanningCostDelta:
    def test_parameter_free_but_not_flop_free(self):
        config = toy_config()
        flat = replace(config, stages=tuple(
            replace(s, spanning=False) for s in config.stages))
        assert model_report(config).total_params == model_report(flat).total_params
        assert model_report(config, 32).total_flops > model_report(flat, 32).total_flops


class TestReachability:
    def brute_conv_step(self, reach, H, W, k):
        r = k // 2
        grid = reach.reshape(-1, H, W)
        out = np.zeros_like(grid)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                shifted = np.zeros_like(grid)
                ys = slice(max(0, dy), min(H, H + dy))
                yd = slice(max(0, -dy), min(H, H - dy))
                xs = slice(max(0, dx), min(W, W + dx))
                xd = slice(max(0, -dx), min(W, W - dx))
                shifted[:, yd, xd] = grid[:, ys, xs]
                out |= shifted
        return out.reshape(reach.shape)

    def test_conv_step_matches_shift_union_oracle(self):
        rng = np.random.default_rng(2)
        H, W = 6, 7
        reach = rng.random((H * W, H * W)) < 0.08
        for k in (3, 5):
            got = reachability_step(reach, "dwconv", H, W, kernel=k)
            np.testing.assert_array_equal(got, self.brute_conv_step(reach, H, W, k))

    def test_neighbor_step_fills_the_tile(self):
        res = analyze_reachability("neighbor", 8, 8, depth=1, window=4)
        center = res.center_maps[0]
        want = np.zeros((8, 8), dtype=bool)
        want[4:8, 4:8] = True  # center pixel (4,4) lives in the lower-right tile
        np.testing.assert_array_equal(center, want)

    def test_distant_step_strides_the_grid(self):
        res = analyze_reachability("distant", 8, 8, depth=1, window=4)
        center = res.center_maps[0]
        want = np.zeros((8, 8), dtype=bool)
        want[0::2, 0::2] = True  # stride sh = sw = 2, offset (0, 0)
        np.testing.assert_array_equal(center, want)

    def test_spanning_step_is_the_union(self):
        """One spanning step equals neighbor | distant from the same state."""
        H = W = 8
        eye = np.eye(H * W, dtype=bool)
        n = reachability_step(eye, "neighbor", H, W, window=4)
        d = reachability_step(eye, "distant", H, W, window=4)
        s = reachability_step(eye, "spanning", H, W, window=4)
        np.testing.assert_array_equal(s, n | d)

    def test_neighbor_only_never_crosses_windows(self):
        res = analyze_reachability("neighbor", 12, 12, depth=4, window=4)
        assert res.layers_to_full is None
        assert all(abs(c - 1 / 9) < 1e-12 for c in res.coverage)

    def test_spanning_reaches_everything_in_two(self):
        for size, window in ((16, 4), (8, 4), (14, 7)):
            res = analyze_reachability("spanning", size, size, depth=2, window=window)
            assert res.layers_to_full == 2

    def test_dwconv_full_coverage_layer_count(self):
        """k=3 influence grows one ring per layer: full at W-1 on W x W."""
        for size in (5, 9):
            res = analyze_reachability("dwconv", size, size, depth=size, kernel=3)
            assert res.layers_to_full == size - 1

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            analyze_reachability("neighbor", 10, 10, depth=1, window=4)
        with pytest.raises(ValueError):
            analyze_reachability("warp", 8, 8, depth=1, window=4)
        assert "warp" not in LAYER_KINDS


class TestBlockRowsMirrorModules:
    def test_attention_block_rows_match_live_parameters(self):
        """Cost rows for one spanning block sum to the module's true size."""
        from emov2.costs import _block_rows
        spec = spanning_hybrid_spec(16, Fraction(2))
        block = MobileBlock(np.random.default_rng(3), spec)
        rows, _, _ = _block_rows("b", spec, 8, 8)
        assert sum(r.params for r in rows) == block.num_parameters()
