"""Recombination of enhanced illumination with reflectance, plus denoising.

reconstruct() forms illumination * reflectance + source (the residual add);
the product is deliberately left unclamped so gradients survive until the
denoiser, which clamps the final image into [0,1].
"""

import torch
import torch.nn as nn

from .blocks import SEBlock
from .config import ModelConfig
from .exceptions import ShapeError


def reconstruct(i_bar: torch.Tensor, r: torch.Tensor, s: torch.Tensor,
                use_residual_add: bool = True) -> torch.Tensor:
    """i_bar * r + s with the illumination broadcast over color channels.

    Output is NOT clamped; values above 1 are legal here.
    """
    if i_bar.dim() != 4 or r.dim() != 4 or s.dim() != 4:
        raise ShapeError("expected NCHW inputs")
    if i_bar.shape[1] != 1:
        raise ShapeError(f"illumination must be 1-channel, got {i_bar.shape[1]}")
    if r.shape[1] != 3 or s.shape[1] != 3:
        raise ShapeError(
            f"reflectance/source must be 3-channel, got {r.shape[1]} and "
            f"{s.shape[1]}")
    if not (i_bar.shape[2:] == r.shape[2:] == s.shape[2:]):
        raise ShapeError(
            f"spatial dims differ: {tuple(i_bar.shape[2:])}, "
            f"{tuple(r.shape[2:])}, {tuple(s.shape[2:])}")
    out = i_bar * r
    if use_residual_add:
        out = out + s
    return out


class Denoiser(nn.Module):
    """Residual conv denoiser: the network predicts a correction to add back.

    head conv, then depth interior stages of conv -> batch norm -> relu ->
    channel gate, then a tail conv whose output is added to the input and
    clamped to [0,1].
    """

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config if config is not None else ModelConfig()
        w = cfg.base_width
        self.head = nn.Conv2d(3, w, 3, padding=1)
        stages = []
        for _ in range(cfg.denoiser_depth):
            stages += [
                nn.Conv2d(w, w, 3, padding=1),
                nn.BatchNorm2d(w),
                nn.ReLU(),
                SEBlock(w, cfg.se_reduction) if cfg.use_seblock else nn.Identity(),
            ]
        self.body = nn.Sequential(*stages)
        self.tail = nn.Conv2d(w, 3, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected a 3-channel NCHW image, got {tuple(x.shape)}")
        correction = self.tail(self.body(self.head(x)))
        return torch.clamp(x + correction, 0.0, 1.0)
