"""Dark region attention over the illumination map.

Two stride-2 pathways (3x3 and 5x5) look at the illumination at half
resolution, each gated by its own sigmoid attention map, then both are
upsampled back and fused with the full-resolution features into a single
re-weighted illumination channel.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig
from .exceptions import ShapeError


def bilinear_upsample(x: torch.Tensor, target_hw: tuple[int, int]) -> torch.Tensor:
    """Bilinear upsample (align_corners=False) to target dims, never down."""
    th, tw = target_hw
    if x.dim() != 4:
        raise ShapeError(f"expected NCHW input, got shape {tuple(x.shape)}")
    if th < x.shape[2] or tw < x.shape[3]:
        raise ShapeError(
            f"target {th}x{tw} is smaller than source "
            f"{x.shape[2]}x{x.shape[3]}")
    if (th, tw) == (x.shape[2], x.shape[3]):
        return x
    return F.interpolate(x, size=(th, tw), mode="bilinear", align_corners=False)


class DarkRegionAttention(nn.Module):
    """Illumination re-weighting: darker areas get more enhancement signal."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config if config is not None else ModelConfig()
        w = cfg.base_width
        self.lift = nn.Conv2d(1, w, 3, padding=1)
        self.path_fine = nn.Conv2d(w, w, 3, stride=2, padding=1)
        self.att_fine = nn.Conv2d(w, 1, 1)
        self.path_coarse = nn.Conv2d(w, w, 5, stride=2, padding=2)
        self.att_coarse = nn.Conv2d(w, 1, 1)
        self.fuse = nn.Conv2d(3 * w, 1, 1)

    def forward(self, i: torch.Tensor) -> torch.Tensor:
        if i.dim() != 4 or i.shape[1] != 1:
            raise ShapeError(
                f"expected a single-channel NCHW map, got {tuple(i.shape)}")
        h, w = i.shape[2], i.shape[3]
        if h % 2 != 0 or w % 2 != 0:
            raise ShapeError(
                f"spatial dims must be even for the stride-2 paths, got {h}x{w}")

        lifted = self.lift(i)
        fine = self.path_fine(lifted)
        fine = fine * torch.sigmoid(self.att_fine(fine))
        coarse = self.path_coarse(lifted)
        coarse = coarse * torch.sigmoid(self.att_coarse(coarse))
        merged = torch.cat([
            lifted,
            bilinear_upsample(fine, (h, w)),
            bilinear_upsample(coarse, (h, w)),
        ], dim=1)
        return torch.sigmoid(self.fuse(merged))
