"""Training losses and feature extractors.

The perceptual loss sums per-layer mean absolute feature differences over
a frozen extractor. Desk-scale work uses a small seeded random-conv
extractor; a full VGG-19 feature stack can be plugged in by loading its
weights from a named-array container file. Charbonnier and the
reference-free spatial/exposure/color combination complete the zoo.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import init_parameters
from .exceptions import ConfigurationError, ShapeError

LOSS_MODES = ("vgg_only", "charbonnier_only", "combined_only", "all")

WELL_EXPOSED_LEVEL = 0.6
SPATIAL_PATCH = 4
EXPOSURE_PATCH = 16


@dataclass
class LossWeights:
    """Weights for total_loss. w_vgg=None resolves per mode: 0.5 when the
    perceptual term is combined with the others, 1.0 when it stands alone."""

    w_vgg: float | None = None
    w_charbonnier: float = 1.0
    w_combined: float = 1.0

    def __post_init__(self):
        for name in ("w_vgg", "w_charbonnier", "w_combined"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {v}")

    def resolved_vgg(self, mode: str) -> float:
        if self.w_vgg is not None:
            return self.w_vgg
        return 0.5 if mode == "all" else 1.0


class IdentityFeatureExtractor(nn.Module):
    """Single 'layer' equal to the image itself; perceptual loss becomes
    plain mean absolute error."""

    def forward(self, x):
        return [x]


class RandomConvFeatureExtractor(nn.Module):
    """Frozen seeded conv stack (widths 8/16/16, stride 2, relu) with a tap
    after every activation. Stands in for a pretrained backbone."""

    def __init__(self, seed: int = 0):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(16, 16, 3, stride=2, padding=1)
        g = torch.Generator().manual_seed(seed)
        init_parameters(self, g)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        f1 = F.relu(self.conv1(x))
        f2 = F.relu(self.conv2(f1))
        f3 = F.relu(self.conv3(f2))
        return [f1, f2, f3]


# VGG-19 conv stack: (name, in, out); "M" marks 2x2 max pooling.
_VGG19_LAYOUT = (
    ("conv1_1", 3, 64), ("conv1_2", 64, 64), "M",
    ("conv2_1", 64, 128), ("conv2_2", 128, 128), "M",
    ("conv3_1", 128, 256), ("conv3_2", 256, 256),
    ("conv3_3", 256, 256), ("conv3_4", 256, 256), "M",
    ("conv4_1", 256, 512), ("conv4_2", 512, 512),
    ("conv4_3", 512, 512), ("conv4_4", 512, 512), "M",
    ("conv5_1", 512, 512), ("conv5_2", 512, 512),
    ("conv5_3", 512, 512), ("conv5_4", 512, 512),
)


class VggFeatureExtractor(nn.Module):
    """VGG-19 feature stack fed from an external weight container.

    The file must hold arrays "<conv name>.weight" / "<conv name>.bias" for
    every conv up to the deepest tap. Taps are conv names; features are
    taken after that conv's relu.
    """

    def __init__(self, weight_path,
                 taps=("conv1_2", "conv2_2", "conv3_4", "conv4_4")):
        super().__init__()
        from .checkpoint import read_arrays
        from .exceptions import CheckpointError

        names = [e[0] for e in _VGG19_LAYOUT if e != "M"]
        unknown = [t for t in taps if t not in names]
        if unknown:
            raise ConfigurationError(
                f"unknown tap layers {unknown}; valid: {names}")
        if not taps:
            raise ConfigurationError("need at least one tap layer")
        self.taps = tuple(taps)
        deepest = max(names.index(t) for t in taps)

        _, arrays = read_arrays(weight_path)
        weights = {name: arr for name, _, arr in arrays}
        self.stages = nn.ModuleList()
        self.stage_names = []
        conv_idx = 0
        for entry in _VGG19_LAYOUT:
            if entry == "M":
                self.stages.append(nn.MaxPool2d(2))
                self.stage_names.append("pool")
                continue
            name, cin, cout = entry
            conv = nn.Conv2d(cin, cout, 3, padding=1)
            wkey, bkey = f"{name}.weight", f"{name}.bias"
            if wkey not in weights or bkey not in weights:
                raise CheckpointError(
                    f"{weight_path}: missing arrays for {name} "
                    f"({wkey}/{bkey})")
            with torch.no_grad():
                conv.weight.copy_(torch.from_numpy(weights[wkey]))
                conv.bias.copy_(torch.from_numpy(weights[bkey]))
            self.stages.append(conv)
            self.stage_names.append(name)
            if conv_idx == deepest:
                break
            conv_idx += 1
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        feats = []
        for name, stage in zip(self.stage_names, self.stages):
            x = stage(x)
            if name != "pool":
                x = F.relu(x)
                if name in self.taps:
                    feats.append(x)
        return feats


def _check_same(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")


def perceptual_loss(pred, gt, extractor) -> torch.Tensor:
    """Sum over extractor layers of mean absolute feature difference."""
    _check_same(pred, gt)
    fp = extractor(pred)
    fg = extractor(gt)
    if len(fp) == 0:
        raise ConfigurationError("feature extractor produced zero layers")
    total = pred.new_zeros(())
    for a, b in zip(fp, fg):
        total = total + (a - b).abs().mean()
    return total


def charbonnier_loss(pred, gt, epsilon: float = 1e-3) -> torch.Tensor:
    """Smooth L1: mean of sqrt(diff^2 + epsilon^2)."""
    _check_same(pred, gt)
    return torch.sqrt((pred - gt) ** 2 + epsilon * epsilon).mean()


def _pooled_gray(x, patch):
    if x.dim() != 4:
        raise ShapeError(f"expected NCHW input, got {tuple(x.shape)}")
    if x.shape[2] < patch or x.shape[3] < patch:
        raise ConfigurationError(
            f"image {x.shape[2]}x{x.shape[3]} smaller than the {patch}x{patch} "
            f"pooling patch")
    return F.avg_pool2d(x.mean(dim=1, keepdim=True), patch)


def spatial_consistency_loss(pred, source) -> torch.Tensor:
    """Neighbor-gradient mismatch between prediction and source.

    Both are channel-averaged and 4x4 average-pooled; the loss is the mean
    over adjacent cell pairs of the squared difference between the two
    images' local gradients.
    """
    _check_same(pred, source)
    y = _pooled_gray(pred, SPATIAL_PATCH)
    s = _pooled_gray(source, SPATIAL_PATCH)
    dy_h = (y[:, :, :, 1:] - y[:, :, :, :-1]) - (s[:, :, :, 1:] - s[:, :, :, :-1])
    dy_v = (y[:, :, 1:, :] - y[:, :, :-1, :]) - (s[:, :, 1:, :] - s[:, :, :-1, :])
    return torch.cat([dy_h.flatten(), dy_v.flatten()]).pow(2).mean()


def exposure_loss(pred) -> torch.Tensor:
    """Squared deviation of 16x16 patch means from the well-exposed level."""
    mu = _pooled_gray(pred, EXPOSURE_PATCH)
    return ((mu - WELL_EXPOSED_LEVEL) ** 2).mean()


def color_constancy_loss(pred) -> torch.Tensor:
    """Sum of squared differences between per-channel means, over the three
    channel pairs, averaged over the batch."""
    if pred.dim() != 4 or pred.shape[1] != 3:
        raise ShapeError(f"expected an N,3,H,W image, got {tuple(pred.shape)}")
    mu = pred.mean(dim=(2, 3))
    r, g, b = mu[:, 0], mu[:, 1], mu[:, 2]
    per_sample = (r - g) ** 2 + (r - b) ** 2 + (g - b) ** 2
    return per_sample.mean()


def combined_zero_dce_loss(pred, source) -> torch.Tensor:
    """Reference-free combination: spatial + exposure + color terms."""
    return (spatial_consistency_loss(pred, source)
            + exposure_loss(pred)
            + color_constancy_loss(pred))


def total_loss(pred, gt, source, mode: str = "vgg_only",
               weights: LossWeights | None = None,
               extractor=None) -> torch.Tensor:
    """Weighted training loss for the given mode."""
    if mode not in LOSS_MODES:
        raise ConfigurationError(
            f"unknown loss mode {mode!r}; valid modes: {list(LOSS_MODES)}")
    w = weights if weights is not None else LossWeights()
    if mode in ("vgg_only", "all") and extractor is None:
        raise ConfigurationError(
            f"mode {mode!r} needs a feature extractor")
    if mode == "vgg_only":
        return w.resolved_vgg(mode) * perceptual_loss(pred, gt, extractor)
    if mode == "charbonnier_only":
        return w.w_charbonnier * charbonnier_loss(pred, gt)
    if mode == "combined_only":
        return w.w_combined * combined_zero_dce_loss(pred, source)
    return (w.resolved_vgg(mode) * perceptual_loss(pred, gt, extractor)
            + w.w_charbonnier * charbonnier_loss(pred, gt)
            + w.w_combined * combined_zero_dce_loss(pred, source))
