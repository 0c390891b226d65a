"""End-to-end low-light enhancement pipeline.

Composition order: decompose -> dark-region attention -> enhance ->
refine -> reconstruct -> denoise. Each optional stage is controlled by a
ModelConfig flag; disabled stages are absent from the module tree (their
parameters disappear), except SE gates which collapse to identity in place.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .config import ModelConfig
from .dark_region import DarkRegionAttention
from .decom import DecompositionNet, check_image
from .enhancer import IlluminationEnhancer, RefinementLayer
from .reconstruction import Denoiser, reconstruct


@dataclass
class PipelineOutputs:
    """All intermediate maps from one forward pass (NCHW tensors)."""

    reflectance: torch.Tensor
    illumination: torch.Tensor
    attended_illumination: torch.Tensor
    enhanced_illumination: torch.Tensor
    reconstructed: torch.Tensor
    output: torch.Tensor


class LowLightEnhancer(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config if config is not None else ModelConfig()
        cfg = self.config
        self.decom = DecompositionNet(cfg)
        self.dark = DarkRegionAttention(cfg) if cfg.use_dark_region else None
        self.enhancer = IlluminationEnhancer(cfg)
        self.refine = RefinementLayer(cfg) if cfg.use_refinement else None
        self.denoiser = Denoiser(cfg) if cfg.use_denoiser else None

    def forward_full(self, s: torch.Tensor) -> PipelineOutputs:
        check_image(s)
        r, i = self.decom(s)
        i_hat = self.dark(i) if self.dark is not None else i
        i_bar = self.enhancer(i_hat, r)
        if self.refine is not None:
            i_bar = self.refine(i_bar)
        recon = reconstruct(i_bar, r, s, self.config.use_residual_add)
        if self.denoiser is not None:
            out = self.denoiser(recon)
        else:
            out = torch.clamp(recon, 0.0, 1.0)
        return PipelineOutputs(
            reflectance=r,
            illumination=i,
            attended_illumination=i_hat,
            enhanced_illumination=i_bar,
            reconstructed=recon,
            output=out,
        )

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        return self.forward_full(s).output
