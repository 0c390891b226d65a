"""Command-line surface: train, enhance, eval, ablate, info.

Exit codes: 0 success, 1 runtime failure (I/O, corrupt checkpoints,
divergence), 2 configuration or usage errors. All artifacts are free of
timestamps so identical invocations produce identical bytes.
"""

import argparse
import re
import sys
from pathlib import Path

import torch
import yaml

from .checkpoint import load_checkpoint, restore_checkpoint
from .config import (ModelConfig, RunConfig, apply_overrides,
                     run_config_from_mapping)
from .data import (IMAGE_EXTENSIONS, crop_to, load_dataset, load_image,
                   pad_to_multiple, save_image)
from .exceptions import (ConfigurationError, DatasetError, RelightError)
from .losses import LossWeights
from .pipeline import LowLightEnhancer
from .profiling import count_flops
from .schedule import ScheduleConfig
from .train import (TrainConfig, evaluate, format_ablation_table,
                    run_ablation, train)


def _load_run_config(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        with open(path) as f:
            doc = yaml.safe_load(f) or {}
        if not isinstance(doc, dict):
            raise ConfigurationError(f"config file {path} must be a mapping")
    cfg = run_config_from_mapping(doc)
    cfg = apply_overrides(cfg, getattr(args, "override", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _schedule_from(cfg: RunConfig) -> ScheduleConfig:
    s = cfg.schedule
    total = s.total_epochs
    warm = min(s.warmup_epochs, total)
    hold = min(max(s.hold_until, warm), total)
    return ScheduleConfig(lr_min=s.lr_min, lr_max=s.lr_max,
                          warmup_epochs=warm, hold_until=hold,
                          total_epochs=total)


def _train_options(cfg: RunConfig) -> TrainConfig:
    t = cfg.train
    return TrainConfig(batch_size=t.batch_size, beta1=t.beta1, beta2=t.beta2,
                       weight_decay=t.weight_decay,
                       checkpoint_interval=t.checkpoint_interval,
                       epochs=t.epochs, augment_flip=t.augment_flip)


def _loss_weights(cfg: RunConfig) -> LossWeights:
    return LossWeights(w_vgg=cfg.loss.w_vgg,
                       w_charbonnier=cfg.loss.w_charbonnier,
                       w_combined=cfg.loss.w_combined)


def _load_split(cfg: RunConfig):
    if cfg.dataset.root is None:
        raise ConfigurationError("dataset.root is required (config or override)")
    return load_dataset(cfg.dataset.root, cfg.dataset.name,
                        cfg.dataset.train_size)


def _model_from_checkpoint(path: str) -> LowLightEnhancer:
    ckpt = load_checkpoint(path)
    model = LowLightEnhancer(ModelConfig.from_dict(ckpt.model_config))
    restore_checkpoint(path, model)
    model.eval()
    return model


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    split = _load_split(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.txt"
    with open(log_path, "w") as log:
        def on_step(rec):
            log.write(f"step={rec.step} epoch={rec.epoch} "
                      f"lr={rec.lr!r} loss={rec.loss!r}\n")

        result = train(split, model_config=cfg.model,
                       schedule=_schedule_from(cfg), loss_mode=cfg.loss.mode,
                       seed=cfg.seed, out_dir=out_dir,
                       options=_train_options(cfg),
                       weights=_loss_weights(cfg), on_step=on_step)
    summary = [
        f"steps={len(result.history)}",
        f"final_loss={result.history[-1].loss!r}",
        f"last_checkpoint={result.last_checkpoint}",
        f"best_checkpoint={result.best_checkpoint}",
        f"best_psnr={result.best_psnr!r}" if result.best_psnr is not None
        else "best_psnr=None",
    ]
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return 0


def _input_files(path: Path):
    if path.is_dir():
        files = [p for p in sorted(path.iterdir())
                 if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS]
        if not files:
            raise DatasetError(f"no image files found in {path}")
        return files
    if path.is_file():
        return [path]
    raise DatasetError(f"input {path} does not exist")


def cmd_enhance(args) -> int:
    model = _model_from_checkpoint(args.ckpt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for src in _input_files(Path(args.input)):
        img = load_image(src)
        padded, native = pad_to_multiple(img, 4)
        with torch.no_grad():
            maps = model.forward_full(padded[None])
        save_image(out_dir / src.name, crop_to(maps.output[0], native))
        if args.dump_intermediates:
            stem = src.stem
            save_image(out_dir / f"{stem}_reflectance.png",
                       crop_to(maps.reflectance[0], native))
            save_image(out_dir / f"{stem}_illumination.png",
                       crop_to(maps.illumination[0], native))
            save_image(out_dir / f"{stem}_dark_attention.png",
                       crop_to(maps.attended_illumination[0], native))
            save_image(out_dir / f"{stem}_enhanced_illumination.png",
                       crop_to(maps.enhanced_illumination[0], native))
        print(f"wrote {out_dir / src.name}")
    return 0


def format_report(report) -> str:
    lines = [f"mean_psnr={report.mean_psnr!r}",
             f"mean_ssim={report.mean_ssim!r}"]
    for image_id, p, s in report.per_image:
        lines.append(f"image.{image_id}.psnr={p!r}")
        lines.append(f"image.{image_id}.ssim={s!r}")
    return "\n".join(lines) + "\n"


def parse_report(path) -> dict:
    """Read a key=value metric report back into a {key: float} dict."""
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, raw = line.partition("=")
        values[key] = float(raw)
    return values


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    split = _load_split(cfg)
    samples = split.test if split.test else None
    if not samples:
        raise DatasetError(
            f"dataset {cfg.dataset.root} has no test split to evaluate")
    model = _model_from_checkpoint(args.ckpt)
    report = evaluate(model, samples)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_report.txt").write_text(format_report(report))
    print(f"mean_psnr={report.mean_psnr!r}")
    print(f"mean_ssim={report.mean_ssim!r}")
    print(f"images={len(report.per_image)}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    split = _load_split(cfg)
    budget = cfg.train.epochs if cfg.train.epochs is not None else 2
    rows = run_ablation(split, budget_epochs=budget,
                        schedule=_schedule_from(cfg),
                        loss_mode=cfg.loss.mode, seed=cfg.seed,
                        options=_train_options(cfg))
    table = format_ablation_table(rows)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.txt").write_text(table + "\n")
    print(table)
    return 0


def _parse_resolution(s: str):
    m = re.fullmatch(r"(\d+)x(\d+)", s)
    if not m:
        raise ConfigurationError(
            f"--resolution must look like 224x224, got {s!r}")
    w, h = int(m.group(1)), int(m.group(2))
    return h, w


def cmd_info(args) -> int:
    if getattr(args, "ckpt", None):
        model_cfg = ModelConfig.from_dict(load_checkpoint(args.ckpt).model_config)
    else:
        model_cfg = _load_run_config(args).model
    hw = _parse_resolution(args.resolution)
    report = count_flops(model_cfg, hw)
    print(f"input resolution: {hw[1]}x{hw[0]} (WxH)")
    print(report.format_table())
    print(f"total_params={report.total_params}")
    print(f"total_flops={report.total_flops}")
    return 0


def _add_common(p, config=True, out=False, seed=False):
    if config:
        p.add_argument("--config", help="YAML run configuration file")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (repeatable, dotted keys)")
    if out:
        p.add_argument("--out", help="output directory")
    if seed:
        p.add_argument("--seed", type=int, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relight",
        description="Low-light image enhancement: training, inference, "
                    "evaluation, ablation and profiling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    _add_common(p, out=True, seed=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance an image or directory")
    p.add_argument("input", help="input image file or directory")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-intermediates", action="store_true",
                   help="also write reflectance/illumination/attention maps")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    _add_common(p, out=True, seed=True)
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score the ablation variants")
    _add_common(p, out=True, seed=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("info", help="parameter and FLOP profile")
    _add_common(p)
    p.add_argument("--ckpt", help="profile the config stored in a checkpoint")
    p.add_argument("--resolution", default="224x224", metavar="WxH",
                   help="input resolution for FLOP counting")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RelightError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
