"""U-shaped illumination enhancer with a bounded tone-mapping head.

The enhancer sees the (attended) illumination concatenated with the
reflectance, runs a two-stage encoder/decoder with skip connections, and
maps the single-channel result through softplus + Reinhard compression so
the enhanced illumination stays in [0,1). A small residual refinement
stage cleans up the result.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import ResidualSEBlock
from .config import ModelConfig
from .exceptions import ShapeError

# Upper clamp bound for illumination maps: strictly below 1 so the
# reconstruction product cannot saturate.
ILLUM_CEIL = 1.0 - 1e-6


def tone_map(h: torch.Tensor) -> torch.Tensor:
    """softplus then x/(1+x): monotone, differentiable, range [0,1)."""
    y = F.softplus(h)
    return y / (1.0 + y)


class ToneMap(nn.Module):
    def forward(self, h):
        return tone_map(h)


class IlluminationEnhancer(nn.Module):
    """Two-stage U-shaped enhancer; no layer exceeds the bottleneck width."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config if config is not None else ModelConfig()
        w, b, r, se = cfg.base_width, cfg.bottleneck_width, cfg.se_reduction, cfg.use_seblock

        self.enc1 = nn.Sequential(nn.Conv2d(4, w, 3, padding=1), nn.ReLU())
        self.enc1_block = ResidualSEBlock(w, r, se)
        self.down1 = nn.Sequential(nn.Conv2d(w, w, 3, stride=2, padding=1), nn.ReLU())
        self.enc2 = nn.Sequential(nn.Conv2d(w, b, 3, padding=1), nn.ReLU())
        self.enc2_block = ResidualSEBlock(b, r, se)
        self.down2 = nn.Sequential(nn.Conv2d(b, b, 3, stride=2, padding=1), nn.ReLU())
        self.bottleneck = ResidualSEBlock(b, r, se)

        self.up1 = nn.Sequential(nn.Conv2d(b, w, 3, padding=1), nn.ReLU())
        self.skip2_proj = nn.Conv2d(b, w, 1)
        self.fuse1 = nn.Sequential(nn.Conv2d(2 * w, w, 3, padding=1), nn.ReLU())
        self.fuse1_block = ResidualSEBlock(w, r, se)
        self.up2 = nn.Sequential(nn.Conv2d(w, w, 3, padding=1), nn.ReLU())
        self.skip1_proj = nn.Conv2d(w, w, 1)
        self.fuse2 = nn.Sequential(nn.Conv2d(2 * w, w, 3, padding=1), nn.ReLU())
        self.fuse2_block = ResidualSEBlock(w, r, se)
        self.head = nn.Conv2d(w, 1, 3, padding=1)
        self.tone = ToneMap()

    @staticmethod
    def _upsample(x, hw):
        return F.interpolate(x, size=hw, mode="bilinear", align_corners=False)

    def forward(self, i_hat: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
        if i_hat.dim() != 4 or r.dim() != 4:
            raise ShapeError("expected NCHW inputs")
        if i_hat.shape[1] != 1 or r.shape[1] != 3:
            raise ShapeError(
                f"expected 1-channel illumination and 3-channel reflectance, "
                f"got {i_hat.shape[1]} and {r.shape[1]}")
        if i_hat.shape[2:] != r.shape[2:] or i_hat.shape[0] != r.shape[0]:
            raise ShapeError(
                f"illumination {tuple(i_hat.shape)} and reflectance "
                f"{tuple(r.shape)} do not align")
        h, w = i_hat.shape[2], i_hat.shape[3]
        if h % 4 != 0 or w % 4 != 0:
            raise ShapeError(f"spatial dims must be divisible by 4, got {h}x{w}")

        x = torch.cat([i_hat, r], dim=1)
        s1 = self.enc1_block(self.enc1(x))
        x = self.down1(s1)
        s2 = self.enc2_block(self.enc2(x))
        x = self.down2(s2)
        x = self.bottleneck(x)

        x = self.up1(self._upsample(x, s2.shape[2:]))
        x = self.fuse1_block(self.fuse1(torch.cat([x, self.skip2_proj(s2)], dim=1)))
        x = self.up2(self._upsample(x, s1.shape[2:]))
        x = self.fuse2_block(self.fuse2(torch.cat([x, self.skip1_proj(s1)], dim=1)))
        return self.tone(self.head(x))


class RefinementLayer(nn.Module):
    """Residual detail correction on the enhanced illumination.

    With all weights zeroed this is the exact identity; the output is
    always clamped back into [0, ILLUM_CEIL].
    """

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config if config is not None else ModelConfig()
        w = cfg.base_width
        self.lift = nn.Conv2d(1, w, 3, padding=1)
        self.block = ResidualSEBlock(w, cfg.se_reduction, cfg.use_seblock)
        self.proj = nn.Conv2d(w, 1, 3, padding=1)

    def forward(self, i_bar: torch.Tensor) -> torch.Tensor:
        if i_bar.dim() != 4 or i_bar.shape[1] != 1:
            raise ShapeError(
                f"expected a single-channel NCHW map, got {tuple(i_bar.shape)}")
        delta = self.proj(self.block(self.lift(i_bar)))
        return torch.clamp(i_bar + delta, 0.0, ILLUM_CEIL)
