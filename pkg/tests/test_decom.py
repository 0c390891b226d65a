import pytest
import torch

from relight import DecompositionNet, ModelConfig, init_parameters
from relight.exceptions import ShapeError

import helpers


def seeded_net(seed=0, **cfg):
    net = DecompositionNet(ModelConfig(**cfg))
    init_parameters(net, torch.Generator().manual_seed(seed))
    return net


def test_full_resolution_shapes():
    net = seeded_net()
    x = torch.rand(1, 3, 224, 224)
    r, i = net(x)
    assert r.shape == (1, 3, 224, 224)
    assert i.shape == (1, 1, 224, 224)


def test_outputs_strictly_inside_unit_interval():
    net = seeded_net(1)
    g = torch.Generator().manual_seed(4)
    for _ in range(3):
        x = torch.rand(2, 3, 16, 16, generator=g)
        r, i = net(x)
        for t in (r, i):
            assert (t > 0).all() and (t < 1).all()


def test_deterministic_forward():
    net = seeded_net(2)
    x = torch.rand(1, 3, 16, 16)
    r1, i1 = net(x)
    r2, i2 = net(x.clone())
    assert torch.equal(r1, r2)
    assert torch.equal(i1, i2)


def test_heads_are_separate_parameterizations():
    net = seeded_net(3)
    assert net.reflectance_head.weight.shape[0] == 3
    assert net.illumination_head.weight.shape[0] == 1
    assert net.reflectance_head.weight.data_ptr() != \
        net.illumination_head.weight.data_ptr()


def test_shape_validation():
    net = seeded_net()
    with pytest.raises(ShapeError):
        net(torch.rand(1, 3, 18, 16))  # not divisible by 4
    with pytest.raises(ShapeError):
        net(torch.rand(1, 3, 4, 4))    # below minimum size
    with pytest.raises(ShapeError):
        net(torch.rand(1, 1, 16, 16))  # wrong channel count
    with pytest.raises(ShapeError):
        net(torch.rand(3, 16, 16))     # missing batch dim


def test_seblock_flag_changes_parameter_count():
    with_se = sum(p.numel() for p in seeded_net().parameters())
    without = sum(p.numel() for p in seeded_net(use_seblock=False).parameters())
    assert without < with_se


def test_gradients_match_finite_differences():
    net = seeded_net(5)
    x = torch.rand(1, 3, 16, 16, generator=torch.Generator().manual_seed(6)).double()

    def loss(m):
        r, i = m(x)
        return r.sum() + i.sum()

    # step 1e-5: the trunk relus make 1e-4 differences straddle kinks
    worst = helpers.fd_check_params(net, loss, step=1e-5,
                                    max_coords_per_tensor=4)
    assert worst < 1e-4
