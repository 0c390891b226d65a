"""Decomposition network: image -> (reflectance, illumination).

A shared conv trunk feeds two learned sigmoid heads, one producing the
3-channel reflectance and one the single-channel illumination. Both factors
therefore live in (0,1) and keep the input's spatial dims.
"""

import torch
import torch.nn as nn

from .blocks import SEBlock
from .config import ModelConfig
from .exceptions import ShapeError


def check_image(x: torch.Tensor, channels: int = 3) -> None:
    """Validate an NCHW image batch for the pipeline: dims >= 8, divisible by 4."""
    if x.dim() != 4:
        raise ShapeError(f"expected NCHW input, got shape {tuple(x.shape)}")
    if x.shape[1] != channels:
        raise ShapeError(f"expected {channels} channels, got {x.shape[1]}")
    h, w = x.shape[2], x.shape[3]
    if h < 8 or w < 8:
        raise ShapeError(f"spatial dims must be >= 8, got {h}x{w}")
    if h % 4 != 0 or w % 4 != 0:
        raise ShapeError(
            f"spatial dims must be divisible by 4 for the downsampling "
            f"stages, got {h}x{w}")


class DecompositionNet(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config if config is not None else ModelConfig()
        w = cfg.base_width
        self.trunk = nn.Sequential(
            nn.Conv2d(3, w, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(w, w, 3, padding=1),
            nn.ReLU(),
            SEBlock(w, cfg.se_reduction) if cfg.use_seblock else nn.Identity(),
        )
        self.reflectance_head = nn.Conv2d(w, 3, 3, padding=1)
        self.illumination_head = nn.Conv2d(w, 1, 3, padding=1)

    def forward(self, s: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        check_image(s)
        feat = self.trunk(s)
        r = torch.sigmoid(self.reflectance_head(feat))
        i = torch.sigmoid(self.illumination_head(feat))
        return r, i
