"""Layer modules: conv oracle, norms, drop path, module tree mechanics."""

import numpy as np
import pytest

from emov2 import tensor as T
from emov2.layers import (BatchNorm2d, Conv2d, Identity, LayerNormTokens,
                          Linear, Module, ModuleList, drop_path,
                          global_avg_pool, trunc_normal)
from emov2.tensor import Tensor, direct_conv2d


class TestConvOracle:
    """Fast conv2d against the naive seven-loop reference."""

    CASES = [
        # cin, cout, k, stride, padding, groups, H, W
        (3, 5, 1, 1, 0, 1, 6, 7),
        (3, 5, 3, 1, 1, 1, 6, 6),
        (4, 4, 3, 1, 1, 4, 5, 5),
        (4, 4, 5, 1, 2, 4, 7, 6),
        (4, 6, 3, 1, 1, 2, 5, 5),
        (3, 5, 3, 2, 1, 1, 8, 9),
        (6, 6, 3, 2, 1, 6, 9, 8),
        (3, 4, 7, 1, 3, 1, 8, 8),
        (2, 8, 1, 1, 0, 2, 4, 4),
        (5, 5, 5, 2, 2, 5, 11, 11),
    ]

    @pytest.mark.parametrize("cin,cout,k,stride,padding,groups,H,W", CASES)
    def test_matches_direct(self, cin, cout, k, stride, padding, groups, H, W):
        rng = np.random.default_rng(cin * 1000 + cout * 100 + k * 10 + stride)
        x = rng.normal(size=(2, cin, H, W))
        w = rng.normal(size=(cout, cin // groups, k, k))
        b = rng.normal(size=(cout,))
        got = T.conv2d(Tensor(x), Tensor(w), Tensor(b),
                       stride=stride, padding=padding, groups=groups)
        want = direct_conv2d(x, w, b, stride=stride, padding=padding, groups=groups)
        np.testing.assert_allclose(got.data, want, rtol=1e-12, atol=1e-12)

    def test_geometry_validation(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(1, 3, 5, 5)))
        w = Tensor(rng.normal(size=(4, 2, 3, 3)))  # 2 != 3/groups
        with pytest.raises(ValueError):
            T.conv2d(x, w, Tensor(np.zeros(4)), padding=1)


class TestConv2dModule:
    def test_default_padding_preserves_size(self):
        rng = np.random.default_rng(1)
        for k in (1, 3, 5, 7):
            conv = Conv2d(rng, 3, 4, k)
            out = conv(Tensor(rng.normal(size=(1, 3, 8, 8))))
            assert out.shape == (1, 4, 8, 8)

    def test_bias_starts_at_zero(self):
        conv = Conv2d(np.random.default_rng(2), 3, 4, 3)
        assert np.all(conv.bias.data == 0.0)

    def test_weight_shape_grouped(self):
        conv = Conv2d(np.random.default_rng(3), 8, 6, 3, groups=2)
        assert conv.weight.shape == (6, 4, 3, 3)


class TestBatchNorm:
    def test_train_output_normalized_before_affine(self):
        """Per-channel batch statistics hit mean 0, variance 1 within 1e-6."""
        bn = BatchNorm2d(5)
        x = Tensor(np.random.default_rng(4).normal(2.0, 3.0, size=(4, 5, 6, 6)))
        out = bn(x).data  # affine is identity at init
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_constant_input_gives_shift(self):
        bn = BatchNorm2d(3)
        bn.shift.data[:] = 7.0
        out = bn(Tensor(np.full((2, 3, 4, 4), 5.0))).data
        np.testing.assert_allclose(out, 7.0, atol=1e-2)

    def test_running_stats_updated_with_momentum(self):
        bn = BatchNorm2d(2, momentum=0.1)
        x = np.random.default_rng(5).normal(3.0, 2.0, size=(8, 2, 4, 4))
        bn(Tensor(x))
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))  # biased, matching the normalizer
        np.testing.assert_allclose(bn.running_mean.data.ravel(), 0.1 * mu, rtol=1e-12)
        np.testing.assert_allclose(bn.running_var.data.ravel(),
                                   0.9 * 1.0 + 0.1 * var, rtol=1e-12)

    def test_eval_uses_running_stats(self):
        bn = BatchNorm2d(2)
        bn.running_mean.data[:] = 1.0
        bn.running_var.data[:] = 4.0
        bn.eval()
        x = np.random.default_rng(6).normal(size=(2, 2, 3, 3))
        out = bn(Tensor(x)).data
        np.testing.assert_allclose(out, (x - 1.0) / np.sqrt(4.0 + 1e-5), rtol=1e-12)

    def test_eval_forward_does_not_touch_running_stats(self):
        bn = BatchNorm2d(2)
        bn.eval()
        before = bn.running_mean.data.copy()
        bn(Tensor(np.random.default_rng(7).normal(size=(2, 2, 3, 3))))
        np.testing.assert_array_equal(bn.running_mean.data, before)

    def test_channel_mismatch_rejected(self):
        bn = BatchNorm2d(3)
        with pytest.raises(ValueError):
            bn(Tensor(np.zeros((1, 4, 2, 2))))


class TestLayerNormTokens:
    def test_normalizes_each_pixel_over_channels(self):
        ln = LayerNormTokens(8)
        x = Tensor(np.random.default_rng(8).normal(1.0, 2.0, size=(2, 8, 3, 3)))
        out = ln(x).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-8)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)

    def test_independent_of_other_pixels(self):
        """Changing one pixel leaves every other pixel's output unchanged."""
        ln = LayerNormTokens(4)
        rng = np.random.default_rng(9)
        x = rng.normal(size=(1, 4, 3, 3))
        base = ln(Tensor(x.copy())).data
        x2 = x.copy()
        x2[0, :, 1, 1] += rng.normal(size=4)
        out = ln(Tensor(x2)).data
        mask = np.ones((3, 3), dtype=bool)
        mask[1, 1] = False
        np.testing.assert_array_equal(out[0][:, mask], base[0][:, mask])
        assert not np.allclose(out[0, :, 1, 1], base[0, :, 1, 1])


class TestDropPath:
    def test_identity_when_eval_or_zero_rate(self):
        rng = np.random.default_rng(10)
        x = Tensor(rng.normal(size=(4, 3, 2, 2)))
        assert drop_path(x, 0.5, False, rng) is x
        assert drop_path(x, 0.0, True, rng) is x

    def test_whole_samples_dropped_or_rescaled(self):
        rng = np.random.default_rng(11)
        x = Tensor(np.ones((64, 3, 2, 2)))
        out = drop_path(x, 0.5, True, rng).data
        per_sample = out.reshape(64, -1)
        for row in per_sample:
            assert np.all(row == 0.0) or np.all(row == 2.0)

    def test_expectation_preserved(self):
        """Monte-Carlo mean at rate 0.5 stays within 2% over 1e5 samples."""
        rng = np.random.default_rng(12)
        x = Tensor(np.ones((100_000, 1)))
        out = drop_path(x, 0.5, True, rng).data
        assert abs(out.mean() - 1.0) < 0.02

    def test_bad_rate_rejected(self):
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError):
            drop_path(Tensor(np.ones((2, 2))), 1.0, True, rng)


class TestModuleTree:
    def make_tree(self):
        rng = np.random.default_rng(14)

        class Net(Module):
            def __init__(self):
                super().__init__()
                self.conv = Conv2d(rng, 3, 4, 3)
                self.blocks = ModuleList([Linear(rng, 4, 4), Linear(rng, 4, 2)])
                self.norm = BatchNorm2d(4)

        return Net()

    def test_named_parameters_insertion_order(self):
        names = [n for n, _ in self.make_tree().named_parameters()]
        assert names == [
            "conv.weight", "conv.bias",
            "blocks.items.0.weight", "blocks.items.0.bias",
            "blocks.items.1.weight", "blocks.items.1.bias",
            "norm.scale", "norm.shift",
        ]

    def test_buffers_separate_from_parameters(self):
        net = self.make_tree()
        buffers = [n for n, _ in net.named_buffers()]
        assert buffers == ["norm.running_mean", "norm.running_var"]
        assert net.num_parameters() == sum(p.size for _, p in net.named_parameters())

    def test_state_dict_roundtrip(self):
        net = self.make_tree()
        other = self.make_tree()
        other.conv.weight.data += 1.0
        other.load_state_dict(net.state_dict())
        np.testing.assert_array_equal(other.conv.weight.data, net.conv.weight.data)

    def test_load_missing_key_rejected(self):
        net = self.make_tree()
        state = net.state_dict()
        del state["conv.weight"]
        with pytest.raises((KeyError, ValueError), match="conv.weight"):
            net.load_state_dict(state)

    def test_load_shape_mismatch_rejected(self):
        net = self.make_tree()
        state = net.state_dict()
        state["conv.weight"] = state["conv.weight"][:1]
        with pytest.raises(ValueError, match="conv.weight"):
            net.load_state_dict(state)

    def test_train_eval_walks_the_tree(self):
        net = self.make_tree()
        net.eval()
        assert not net.norm.training
        net.train()
        assert net.norm.training

    def test_zero_grad_clears_all(self):
        net = self.make_tree()
        for _, p in net.named_parameters():
            p.grad = np.ones_like(p.data)
        net.zero_grad()
        assert all(p.grad is None for _, p in net.named_parameters())


class TestSmallPieces:
    def test_identity_passthrough(self):
        x = Tensor(np.arange(4.0))
        assert Identity()(x) is x

    def test_global_avg_pool(self):
        x = np.random.default_rng(15).normal(size=(2, 3, 4, 5))
        out = global_avg_pool(Tensor(x))
        np.testing.assert_allclose(out.data, x.mean(axis=(2, 3)), rtol=1e-12)

    def test_trunc_normal_bounds_and_moments(self):
        rng = np.random.default_rng(16)
        draws = trunc_normal(rng, (200_000,), std=0.02)
        assert np.all(np.abs(draws) <= 0.04 + 1e-12)
        assert abs(draws.mean()) < 1e-3
        assert abs(draws.std() - 0.02) < 0.005
