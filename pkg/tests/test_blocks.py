import numpy as np
import pytest
import torch
import torch.nn as nn

from relight import (ConvSpec, ResidualBlock, ResidualSEBlock, SEBlock,
                     conv2d, init_parameters)
from relight.exceptions import ConfigurationError, ShapeError

import helpers
import oracles


class TestConvSpec:
    def test_default_padding_preserves_shape(self):
        spec = ConvSpec(3, 8, kernel=5)
        assert spec.padding == 2
        assert spec.output_hw(16, 16) == (16, 16)

    def test_stride2_output_dims(self):
        spec = ConvSpec(1, 1, kernel=3, stride=2, padding=1)
        assert spec.output_hw(16, 16) == (8, 8)
        assert spec.output_hw(5, 5) == (3, 3)

    def test_rejects_bad_fields(self):
        with pytest.raises(ConfigurationError):
            ConvSpec(0, 8)
        with pytest.raises(ConfigurationError):
            ConvSpec(3, 8, kernel=4)
        with pytest.raises(ConfigurationError):
            ConvSpec(3, 8, kernel=3, stride=0)
        with pytest.raises(ConfigurationError):
            ConvSpec(3, 8, kernel=3, stride=1, padding=0)
        with pytest.raises(ConfigurationError):
            ConvSpec(3, 8, kernel=3, stride=2, padding=-1)

    def test_nonpositive_output_is_shape_error(self):
        spec = ConvSpec(1, 1, kernel=5, stride=1, padding=2)
        spec.output_hw(8, 8)
        tight = ConvSpec(1, 1, kernel=7, stride=2, padding=0)
        with pytest.raises(ShapeError):
            tight.output_hw(4, 4)


class TestConv2d:
    def test_one_by_one_permutes_channels(self):
        x = torch.rand(1, 3, 6, 6)
        w = torch.zeros(3, 3, 1, 1)
        w[0, 2, 0, 0] = 1.0
        w[1, 0, 0, 0] = 1.0
        w[2, 1, 0, 0] = 1.0
        out = conv2d(x, ConvSpec(3, 3, kernel=1), w)
        assert torch.equal(out[:, 0], x[:, 2])
        assert torch.equal(out[:, 1], x[:, 0])
        assert torch.equal(out[:, 2], x[:, 1])

    def test_ones_kernel_on_constant_interior(self):
        v = 0.37
        x = torch.full((1, 1, 8, 8), v)
        w = torch.ones(1, 1, 3, 3)
        out = conv2d(x, ConvSpec(1, 1, kernel=3), w)
        assert out[0, 0, 4, 4].item() == pytest.approx(9 * v, abs=1e-6)

    def test_matches_loop_oracle_stride2(self):
        g = torch.Generator().manual_seed(11)
        x = torch.rand(1, 2, 5, 5, generator=g)
        w = torch.randn(4, 2, 3, 3, generator=g)
        b = torch.randn(4, generator=g)
        out = conv2d(x, ConvSpec(2, 4, kernel=3, stride=2, padding=1), w, b)
        ref = oracles.conv2d_loop(x[0].numpy(), w.numpy(), b.numpy(),
                                  stride=2, padding=1)
        assert np.allclose(out[0].numpy(), ref, atol=1e-6)

    def test_linear_in_input(self):
        g = torch.Generator().manual_seed(3)
        spec = ConvSpec(2, 3, kernel=3)
        w = torch.randn(3, 2, 3, 3, generator=g)
        b = torch.randn(3, generator=g)
        x = torch.rand(1, 2, 6, 6, generator=g)
        y = torch.rand(1, 2, 6, 6, generator=g)
        for alpha, beta in [(0.7, -1.3), (2.0, 0.25)]:
            lhs = conv2d(alpha * x + beta * y, spec, w, b)
            rhs = (alpha * conv2d(x, spec, w, b) + beta * conv2d(y, spec, w, b)
                   - (alpha + beta - 1) * b.view(1, -1, 1, 1))
            assert torch.allclose(lhs, rhs, atol=1e-5)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(torch.rand(1, 3, 8, 8), ConvSpec(2, 4, kernel=3),
                   torch.randn(4, 2, 3, 3))


class TestSEBlock:
    def test_identity_gating_when_gate_saturates(self):
        se = SEBlock(8, reduction=8)
        with torch.no_grad():
            se.fc1.weight.zero_()
            se.fc1.bias.zero_()
            se.fc2.weight.zero_()
            se.fc2.bias.fill_(50.0)  # sigmoid(50) == 1 in float32
        x = torch.rand(2, 8, 4, 4)
        assert torch.equal(se(x), x * torch.sigmoid(torch.tensor(50.0)))
        assert torch.allclose(se(x), x, atol=1e-7)

    def test_gap_of_constant_channels(self):
        v = torch.tensor([0.1, 0.7, -2.0, 3.5])
        x = v.view(1, 4, 1, 1).expand(1, 4, 5, 5).contiguous()
        g = x.mean(dim=(2, 3))
        assert torch.allclose(g[0], v, atol=0)

    def test_matches_straight_line_oracle(self):
        g = torch.Generator().manual_seed(21)
        se = SEBlock(8, reduction=4)
        init_parameters(se, g)
        with torch.no_grad():
            se.fc1.bias.normal_(0, 0.5, generator=g)
            se.fc2.bias.normal_(0, 0.5, generator=g)
        x = torch.rand(1, 8, 4, 4, generator=g)
        out = se(x)
        ref = oracles.se_line(x[0].numpy(),
                              se.fc1.weight.detach().numpy(),
                              se.fc1.bias.detach().numpy(),
                              se.fc2.weight.detach().numpy(),
                              se.fc2.bias.detach().numpy())
        assert np.allclose(out[0].detach().numpy(), ref, atol=1e-6)

    def test_never_amplifies(self):
        g = torch.Generator().manual_seed(5)
        se = SEBlock(16)
        init_parameters(se, g)
        for _ in range(5):
            x = torch.randn(2, 16, 6, 6, generator=g) * 3
            out = se(x)
            assert (out.abs() <= x.abs() + 1e-7).all()

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            SEBlock(30, reduction=8)
        with pytest.raises(ConfigurationError):
            SEBlock(0)
        se = SEBlock(8)
        with pytest.raises(ConfigurationError):
            se(torch.rand(1, 4, 4, 4))

    def test_gradients_match_finite_differences(self):
        g = torch.Generator().manual_seed(9)
        se = SEBlock(8, reduction=4)
        init_parameters(se, g)
        x = torch.rand(1, 8, 16, 16, generator=g).double()
        worst = helpers.fd_check_params(se, lambda m: m(x).sum())
        assert worst < 1e-4


class TestResidualBlock:
    def test_zero_branch_is_exact_identity(self):
        block = ResidualBlock(6)
        with torch.no_grad():
            for p in block.parameters():
                p.zero_()
        x = torch.randn(2, 6, 5, 7)
        assert torch.equal(block(x), x)

    def test_zero_input_zero_bias_gives_zero(self):
        block = ResidualBlock(4)
        with torch.no_grad():
            block.conv1.bias.zero_()
            block.conv2.bias.zero_()
        x = torch.zeros(1, 4, 6, 6)
        assert torch.equal(block(x), x)

    def test_branch_matches_conv_chain_oracle(self):
        g = torch.Generator().manual_seed(33)
        block = ResidualBlock(32)
        init_parameters(block, g)
        with torch.no_grad():
            block.conv1.bias.normal_(0, 0.1, generator=g)
            block.conv2.bias.normal_(0, 0.1, generator=g)
        x = torch.rand(1, 32, 8, 8, generator=g)
        out = block(x)
        mid = oracles.conv2d_loop(x[0].numpy(),
                                  block.conv1.weight.detach().numpy(),
                                  block.conv1.bias.detach().numpy(), padding=1)
        mid = np.maximum(mid, 0.0)
        branch = oracles.conv2d_loop(mid,
                                     block.conv2.weight.detach().numpy(),
                                     block.conv2.bias.detach().numpy(),
                                     padding=1)
        assert np.allclose((out - x)[0].detach().numpy(), branch, atol=1e-6)

    def test_channel_mismatch(self):
        block = ResidualBlock(8)
        with pytest.raises(ConfigurationError):
            block(torch.rand(1, 4, 6, 6))

    def test_gradients_match_finite_differences(self):
        g = torch.Generator().manual_seed(13)
        block = ResidualBlock(4)
        init_parameters(block, g)
        x = torch.rand(1, 4, 16, 16, generator=g).double()
        worst = helpers.fd_check_params(block, lambda m: (m(x) ** 2).sum())
        assert worst < 1e-4


class TestResidualSEBlock:
    def test_se_ablated_to_identity(self):
        block = ResidualSEBlock(8, use_seblock=False)
        assert isinstance(block.se, nn.Identity)
        with torch.no_grad():
            for p in block.parameters():
                p.zero_()
        x = torch.randn(1, 8, 4, 4)
        assert torch.equal(block(x), x)

    def test_composition_order(self):
        g = torch.Generator().manual_seed(2)
        block = ResidualSEBlock(8, reduction=4)
        init_parameters(block, g)
        with torch.no_grad():
            block.se.fc1.bias.normal_(0, 0.3, generator=g)
            block.se.fc2.bias.normal_(0, 0.3, generator=g)
        x = torch.rand(1, 8, 6, 6, generator=g)
        expected = block.se(block.residual(x))
        assert torch.equal(block(x), expected)


class TestInitParameters:
    def test_deterministic_given_seed(self):
        a = ResidualSEBlock(8)
        b = ResidualSEBlock(8)
        init_parameters(a, torch.Generator().manual_seed(77))
        init_parameters(b, torch.Generator().manual_seed(77))
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_bias_and_norm_conventions(self):
        stack = nn.Sequential(nn.Conv2d(3, 8, 3, padding=1),
                              nn.BatchNorm2d(8), nn.Linear(4, 4))
        init_parameters(stack, torch.Generator().manual_seed(1))
        assert torch.equal(stack[0].bias, torch.zeros(8))
        assert torch.equal(stack[1].weight, torch.ones(8))
        assert torch.equal(stack[1].bias, torch.zeros(8))
        assert torch.equal(stack[2].bias, torch.zeros(4))
        assert stack[0].weight.std().item() > 0
