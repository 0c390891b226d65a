"""Training harness: AdamW recipe, evaluation, ablation runner.

All randomness flows from one integer seed: model init uses it directly,
epoch shuffles derive per-epoch generators from it, so two runs with the
same seed produce identical loss sequences.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .blocks import init_parameters
from .checkpoint import save_checkpoint
from .config import (FULL_TRAINING_REFERENCE, ModelConfig, VARIANTS,
                     variant_config)
from .data import DatasetSplit, crop_to, pad_to_multiple
from .exceptions import ConfigurationError, TrainingDivergedError
from .losses import LossWeights, RandomConvFeatureExtractor, total_loss
from .metrics import MetricReport, psnr, ssim
from .pipeline import LowLightEnhancer
from .profiling import count_params
from .schedule import ScheduleConfig, lr_at

_EPOCH_SEED_STRIDE = 1000003


@dataclass
class TrainConfig:
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    checkpoint_interval: int = 50
    epochs: int | None = None       # cap; defaults to schedule.total_epochs
    augment_flip: bool = False

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ConfigurationError("batch_size must be positive")
        if self.checkpoint_interval <= 0:
            raise ConfigurationError("checkpoint_interval must be positive")
        if self.epochs is not None and self.epochs <= 0:
            raise ConfigurationError("epochs must be positive when set")


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    last_checkpoint: str | None = None
    best_checkpoint: str | None = None
    best_psnr: float | None = None
    model: LowLightEnhancer | None = None


def _epoch_order(n: int, seed: int, epoch: int) -> list:
    g = torch.Generator().manual_seed(seed * _EPOCH_SEED_STRIDE + epoch)
    return torch.randperm(n, generator=g).tolist()


def _flip_mask(n: int, seed: int, epoch: int) -> list:
    g = torch.Generator().manual_seed(seed * _EPOCH_SEED_STRIDE + epoch + 1)
    return (torch.rand(n, generator=g) < 0.5).tolist()


def enhance_padded(model: LowLightEnhancer, low: torch.Tensor) -> torch.Tensor:
    """Run one CHW image at native size: pad to x4, forward, crop back."""
    padded, native = pad_to_multiple(low, 4)
    with torch.no_grad():
        out = model(padded[None])[0]
    return crop_to(out, native)


def evaluate(model: LowLightEnhancer, samples) -> MetricReport:
    """Mean PSNR/SSIM over paired samples at native resolution."""
    was_training = model.training
    model.eval()
    per_image = []
    try:
        for sample in samples:
            out = enhance_padded(model, sample.low)
            per_image.append((sample.id, psnr(out, sample.high),
                              ssim(out, sample.high)))
    finally:
        if was_training:
            model.train()
    if not per_image:
        raise ConfigurationError("cannot evaluate on an empty sample list")
    mean_psnr = sum(p for _, p, _ in per_image) / len(per_image)
    mean_ssim = sum(s for _, _, s in per_image) / len(per_image)
    return MetricReport(mean_psnr=mean_psnr, mean_ssim=mean_ssim,
                        per_image=per_image)


def train(split: DatasetSplit,
          model_config: ModelConfig | None = None,
          schedule: ScheduleConfig | None = None,
          loss_mode: str = "vgg_only",
          seed: int = 0,
          out_dir=None,
          options: TrainConfig | None = None,
          weights: LossWeights | None = None,
          extractor=None,
          on_step=None) -> TrainResult:
    """Train a model on split.train with the AdamW warmup/hold/cosine recipe.

    Emits one StepRecord per optimization step (also passed to on_step),
    checkpoints every options.checkpoint_interval epochs plus whenever test
    PSNR improves, and aborts with TrainingDivergedError on non-finite loss.
    """
    if not split.train:
        raise ConfigurationError("training split is empty")
    cfg = model_config if model_config is not None else ModelConfig()
    sched = schedule if schedule is not None else ScheduleConfig()
    opts = options if options is not None else TrainConfig()
    epochs = opts.epochs if opts.epochs is not None else sched.total_epochs
    if epochs > sched.total_epochs:
        raise ConfigurationError(
            f"epochs ({epochs}) exceeds schedule.total_epochs "
            f"({sched.total_epochs})")
    if extractor is None and loss_mode in ("vgg_only", "all"):
        extractor = RandomConvFeatureExtractor(seed=seed)

    model = LowLightEnhancer(cfg)
    init_parameters(model, torch.Generator().manual_seed(seed))
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=sched.lr_min,
        betas=(opts.beta1, opts.beta2), weight_decay=opts.weight_decay)

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    result = TrainResult(model=model)
    lows = [s.low for s in split.train]
    highs = [s.high for s in split.train]
    n = len(lows)
    step = 0

    def save(tag: str) -> str:
        path = str(out_path / f"ckpt_{tag}.rck")
        save_checkpoint(path, model, optimizer, epoch=epoch, seed=seed)
        return path

    for epoch in range(epochs):
        lr = lr_at(epoch, sched)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = _epoch_order(n, seed, epoch)
        flips = _flip_mask(n, seed, epoch) if opts.augment_flip else None
        for start in range(0, n, opts.batch_size):
            idx = order[start:start + opts.batch_size]
            low = torch.stack([lows[i] for i in idx])
            high = torch.stack([highs[i] for i in idx])
            if flips is not None:
                flip = torch.tensor([flips[i] for i in idx])
                low = torch.where(flip[:, None, None, None],
                                  low.flip(-1), low)
                high = torch.where(flip[:, None, None, None],
                                   high.flip(-1), high)
            optimizer.zero_grad()
            pred = model(low)
            loss = total_loss(pred, high, low, mode=loss_mode,
                              weights=weights, extractor=extractor)
            loss_val = float(loss.detach())
            if not math.isfinite(loss_val):
                raise TrainingDivergedError(
                    f"non-finite loss {loss_val} at step {step} "
                    f"(epoch {epoch}, lr {lr:.3e})",
                    last_checkpoint=result.last_checkpoint)
            loss.backward()
            optimizer.step()
            record = StepRecord(step=step, epoch=epoch, lr=lr, loss=loss_val)
            result.history.append(record)
            if on_step is not None:
                on_step(record)
            step += 1

        end_of_interval = (epoch + 1) % opts.checkpoint_interval == 0
        if out_path is not None and (end_of_interval or epoch == epochs - 1):
            result.last_checkpoint = save(f"epoch_{epoch + 1:04d}")
            if split.test:
                report = evaluate(model, split.test)
                if result.best_psnr is None or report.mean_psnr > result.best_psnr:
                    result.best_psnr = report.mean_psnr
                    result.best_checkpoint = save("best")
    return result


@dataclass
class AblationRow:
    variant: str
    psnr: float
    ssim: float
    params: int
    reference: tuple | None = None   # full-scale (psnr, ssim), informational


def run_ablation(split: DatasetSplit, variants=None, budget_epochs: int = 2,
                 schedule: ScheduleConfig | None = None,
                 loss_mode: str = "charbonnier_only", seed: int = 0,
                 options: TrainConfig | None = None) -> list:
    """Train every requested variant under one seed/budget and report
    (variant, psnr, ssim, params) rows, baseline first.

    The attached reference numbers come from full-scale training and are
    informational only; desk-scale budgets will not approach them.
    """
    if variants is None:
        variants = list(VARIANTS)
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ConfigurationError(
            f"unknown variants {unknown}; valid: {sorted(VARIANTS)}")
    ordered = ([v for v in variants if v == "baseline"]
               + [v for v in variants if v != "baseline"])
    sched = schedule if schedule is not None else ScheduleConfig()
    opts = options if options is not None else TrainConfig()
    opts = TrainConfig(batch_size=opts.batch_size, beta1=opts.beta1,
                       beta2=opts.beta2, weight_decay=opts.weight_decay,
                       checkpoint_interval=opts.checkpoint_interval,
                       epochs=budget_epochs, augment_flip=opts.augment_flip)

    rows = []
    for name in ordered:
        cfg = variant_config(name)
        result = train(split, model_config=cfg, schedule=sched,
                       loss_mode=loss_mode, seed=seed, options=opts)
        eval_samples = split.test if split.test else split.train
        report = evaluate(result.model, eval_samples)
        rows.append(AblationRow(
            variant=name, psnr=report.mean_psnr, ssim=report.mean_ssim,
            params=count_params(result.model),
            reference=FULL_TRAINING_REFERENCE.get(name)))
    return rows


def format_ablation_table(rows) -> str:
    header = (f"{'variant':<14} {'psnr':>8} {'ssim':>8} {'params':>9} "
              f"{'reference psnr/ssim (full-scale, informational)':>46}")
    lines = [header, "-" * len(header)]
    for r in rows:
        ref = (f"{r.reference[0]:.2f}/{r.reference[1]:.3f}"
               if r.reference else "-")
        lines.append(f"{r.variant:<14} {r.psnr:>8.2f} {r.ssim:>8.4f} "
                     f"{r.params:>9} {ref:>46}")
    return "\n".join(lines)
