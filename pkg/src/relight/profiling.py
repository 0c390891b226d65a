"""Parameter and FLOP accounting.

FLOPs use the 2x multiply-accumulate convention: a conv layer costs
2*K*K*Cin*Cout*Hout*Wout (bias excluded), a linear layer 2*in*out per row,
and every elementwise stage (batch norm, activations, gates, adds, clamps,
upsampling) costs 2 per produced element. Composite blocks report their
functional elementwise work themselves; child convs/linears/norms are
counted by their own hooks, so table rows sum exactly to the totals.
"""

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .blocks import ResidualBlock, SEBlock
from .config import ModelConfig
from .dark_region import DarkRegionAttention
from .decom import DecompositionNet
from .enhancer import IlluminationEnhancer, RefinementLayer, ToneMap
from .pipeline import LowLightEnhancer
from .reconstruction import Denoiser


def count_params(model_or_config) -> int:
    """Exact number of learnable scalars (conv kernels, biases, affines)."""
    model = model_or_config
    if isinstance(model_or_config, ModelConfig):
        model = LowLightEnhancer(model_or_config)
    return sum(p.numel() for p in model.parameters())


def conv_flops(cin: int, cout: int, kernel: int, hout: int, wout: int,
               batch: int = 1) -> int:
    return 2 * kernel * kernel * cin * cout * hout * wout * batch


@dataclass
class LayerProfile:
    name: str
    kind: str
    out_shape: tuple
    params: int
    flops: int


@dataclass
class ProfileReport:
    total_params: int
    total_flops: int
    input_hw: tuple
    rows: list = field(default_factory=list)

    def format_table(self) -> str:
        header = f"{'layer':<40} {'kind':<22} {'output':<20} {'params':>10} {'flops':>14}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            shape = "x".join(str(d) for d in r.out_shape) if r.out_shape else "-"
            lines.append(f"{r.name:<40} {r.kind:<22} {shape:<20} "
                         f"{r.params:>10} {r.flops:>14}")
        lines.append("-" * len(header))
        lines.append(f"{'total':<40} {'':<22} {'':<20} "
                     f"{self.total_params:>10} {self.total_flops:>14}")
        return "\n".join(lines)


def _numel(t: torch.Tensor) -> int:
    return int(t.numel())


def _own_flops(m: nn.Module, inputs, output) -> int:
    """FLOPs performed directly by this module, excluding child modules."""
    if isinstance(m, nn.Conv2d):
        cin = m.in_channels // m.groups
        kh, kw = m.kernel_size
        return (2 * kh * kw * cin * m.out_channels
                * output.shape[2] * output.shape[3] * output.shape[0])
    if isinstance(m, nn.Linear):
        rows = _numel(output) // m.out_features
        return 2 * m.in_features * m.out_features * rows
    if isinstance(m, (nn.BatchNorm2d, nn.ReLU)):
        return 2 * _numel(output)
    if isinstance(m, ToneMap):
        # softplus pass plus the x/(1+x) compression pass
        return 4 * _numel(output)
    if isinstance(m, SEBlock):
        x = inputs[0]
        n, c = x.shape[0], x.shape[1]
        red = m.fc1.out_features
        # global average pool + relu + sigmoid gate + channel rescale
        return 2 * _numel(x) + 2 * n * red + 2 * n * c + 2 * _numel(output)
    if isinstance(m, ResidualBlock):
        # inner relu + skip add
        return 4 * _numel(output)
    if isinstance(m, DarkRegionAttention):
        x = inputs[0]
        n, h, w = x.shape[0], x.shape[2], x.shape[3]
        cw = m.lift.out_channels
        half = n * cw * (h // 2) * (w // 2)
        gate = 2 * (n * (h // 2) * (w // 2)) + 2 * half  # sigmoid + multiply
        upsample = 2 * (n * cw * h * w)
        return 2 * gate + 2 * upsample + 2 * _numel(output)  # + final sigmoid
    if isinstance(m, IlluminationEnhancer):
        x = inputs[0]
        n, h, w = x.shape[0], x.shape[2], x.shape[3]
        b = m.skip2_proj.in_channels
        cw = m.skip1_proj.in_channels
        # the two functional bilinear upsamples in the decoder
        return 2 * (n * b * (h // 2) * (w // 2)) + 2 * (n * cw * h * w)
    if isinstance(m, (RefinementLayer, Denoiser)):
        # residual add + clamp
        return 4 * _numel(output)
    if isinstance(m, DecompositionNet):
        r, i = output
        return 2 * _numel(r) + 2 * _numel(i)  # the two sigmoid heads
    if isinstance(m, LowLightEnhancer):
        out = output if isinstance(output, torch.Tensor) else output.output
        total = 2 * _numel(out)  # illumination*reflectance product
        if m.config.use_residual_add:
            total += 2 * _numel(out)
        if m.denoiser is None:
            total += 2 * _numel(out)  # final clamp
        return total
    return 0


def _out_shape(output):
    if isinstance(output, torch.Tensor):
        return tuple(output.shape)
    if isinstance(output, (tuple, list)) and output and isinstance(output[0], torch.Tensor):
        return tuple(output[0].shape)
    return ()


def profile_model(model: nn.Module, example_inputs: tuple) -> ProfileReport:
    """Run one forward pass under hooks and collect per-layer costs."""
    flops = {}
    shapes = {}
    names = {id(m): (name if name else type(model).__name__)
             for name, m in model.named_modules()}
    handles = []

    def hook(m, inputs, output):
        key = id(m)
        flops[key] = flops.get(key, 0) + _own_flops(m, inputs, output)
        shapes[key] = _out_shape(output)

    for m in model.modules():
        handles.append(m.register_forward_hook(hook))
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            model(*example_inputs)
    finally:
        for h in handles:
            h.remove()
        if was_training:
            model.train()

    rows = []
    for name, m in model.named_modules():
        own_params = sum(p.numel() for p in m.parameters(recurse=False))
        own = flops.get(id(m), 0)
        if own_params == 0 and own == 0:
            continue
        rows.append(LayerProfile(
            name=names[id(m)], kind=type(m).__name__,
            out_shape=shapes.get(id(m), ()), params=own_params, flops=own))
    x = example_inputs[0]
    return ProfileReport(
        total_params=sum(r.params for r in rows),
        total_flops=sum(r.flops for r in rows),
        input_hw=(x.shape[-2], x.shape[-1]),
        rows=rows,
    )


def count_flops(config: ModelConfig | None = None,
                input_hw: tuple = (224, 224), batch: int = 1) -> ProfileReport:
    cfg = config if config is not None else ModelConfig()
    model = LowLightEnhancer(cfg)
    x = torch.full((batch, 3, input_hw[0], input_hw[1]), 0.5)
    return profile_model(model, (x,))
