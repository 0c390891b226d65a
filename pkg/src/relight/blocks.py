"""Reusable neural building blocks.

Squeeze-excitation gating, residual refinement and validated convolution
specs. Every sub-network in the package composes these, so the shape and
channel checks live here and fail at construction time where possible.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .exceptions import ConfigurationError, ShapeError


@dataclass(frozen=True)
class ConvSpec:
    """Validated convolution hyperparameters.

    Stride-1 convs must use the shape-preserving padding (kernel-1)/2;
    pass padding=None to get that default.
    """

    in_channels: int
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int | None = None

    def __post_init__(self):
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ConfigurationError("channel counts must be positive")
        if self.kernel <= 0 or self.kernel % 2 == 0:
            raise ConfigurationError(
                f"kernel must be an odd positive integer, got {self.kernel}")
        if self.stride <= 0:
            raise ConfigurationError(f"stride must be positive, got {self.stride}")
        if self.padding is None:
            object.__setattr__(self, "padding", (self.kernel - 1) // 2)
        if self.padding < 0:
            raise ConfigurationError(f"padding must be >= 0, got {self.padding}")
        if self.stride == 1 and self.padding != (self.kernel - 1) // 2:
            raise ConfigurationError(
                f"stride-1 convs are shape-preserving: padding must be "
                f"{(self.kernel - 1) // 2} for kernel {self.kernel}, "
                f"got {self.padding}")

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"conv {self.kernel}x{self.kernel} stride {self.stride} "
                f"padding {self.padding} on {h}x{w} input gives non-positive "
                f"output {oh}x{ow}")
        return oh, ow

    def build(self) -> nn.Conv2d:
        return nn.Conv2d(self.in_channels, self.out_channels, self.kernel,
                         stride=self.stride, padding=self.padding)


def conv2d(x: torch.Tensor, spec: ConvSpec, weight: torch.Tensor,
           bias: torch.Tensor | None = None) -> torch.Tensor:
    """Cross-correlation with bias under a validated spec (NCHW)."""
    if x.dim() != 4:
        raise ShapeError(f"expected NCHW input, got {tuple(x.shape)}")
    if x.shape[1] != spec.in_channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels, spec expects {spec.in_channels}")
    spec.output_hw(x.shape[2], x.shape[3])
    return F.conv2d(x, weight, bias, stride=spec.stride, padding=spec.padding)


class SEBlock(nn.Module):
    """Channel gating: global average pool -> bottleneck MLP -> sigmoid scale."""

    def __init__(self, channels: int, reduction: int = 8):
        super().__init__()
        if channels <= 0 or reduction <= 0:
            raise ConfigurationError("channels and reduction must be positive")
        if channels % reduction != 0:
            raise ConfigurationError(
                f"channels ({channels}) must be divisible by reduction "
                f"({reduction})")
        reduced = channels // reduction
        if reduced < 1:
            raise ConfigurationError(
                f"reduced width {reduced} is below 1; shrink the reduction")
        self.channels = channels
        self.fc1 = nn.Linear(channels, reduced)
        self.fc2 = nn.Linear(reduced, channels)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ConfigurationError(
                f"expected {self.channels} channels, got {x.shape[1]}")
        g = x.mean(dim=(2, 3))
        g = torch.sigmoid(self.fc2(F.relu(self.fc1(g))))
        return x * g[:, :, None, None]


class ResidualBlock(nn.Module):
    """x + conv(relu(conv(x))), both convs 3x3 shape-preserving.

    No activation after the skip add: the block with zeroed branch weights
    is an exact identity, which downstream shape/gradient checks rely on.
    """

    def __init__(self, channels: int):
        super().__init__()
        if channels <= 0:
            raise ConfigurationError("channels must be positive")
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        if x.shape[1] != self.conv1.in_channels:
            raise ConfigurationError(
                f"expected {self.conv1.in_channels} channels, got {x.shape[1]}")
        return x + self.conv2(F.relu(self.conv1(x)))


class ResidualSEBlock(nn.Module):
    """Residual refinement followed by channel gating.

    With use_seblock=False the gate collapses to identity so shapes and
    wiring stay fixed while the parameters disappear.
    """

    def __init__(self, channels: int, reduction: int = 8, use_seblock: bool = True):
        super().__init__()
        self.residual = ResidualBlock(channels)
        self.se = SEBlock(channels, reduction) if use_seblock else nn.Identity()

    def forward(self, x):
        return self.se(self.residual(x))


def init_parameters(model: nn.Module, generator: torch.Generator) -> None:
    """Deterministically initialize a model in module-definition order.

    Conv and linear weights get fan-in-scaled normals (the usual relu gain),
    biases are zeroed, batch norms reset to identity with fresh statistics.
    """
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            fan_in = m.weight.shape[1]
            if isinstance(m, nn.Conv2d):
                fan_in *= m.weight.shape[2] * m.weight.shape[3]
            std = math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.BatchNorm2d):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
            m.reset_running_stats()
