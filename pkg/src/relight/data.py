"""Paired low/normal-light dataset loading and image I/O.

Layouts:
    <root>/low/<stem>.<ext> + <root>/high/<stem>.<ext>    (flat)
    <root>/{train,test}/{low,high}/<stem>.<ext>           (pre-split)

Pairs are matched by filename stem; stems present on only one side are
excluded with a warning. Named datasets carry fixed train:test sizes and a
flat layout is split accordingly (sorted order, train first). Training
images are resized; test images stay at native resolution and are
reflection-padded to a multiple of 4 only at evaluation time.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .exceptions import DatasetError

NAMED_SPLITS = {
    "lol-v1": (485, 15),
    "lol-v2-real": (689, 100),
    "lol-v2-syn": (900, 100),
    "sid": (2564, 133),
}

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp")


@dataclass
class PairedSample:
    low: torch.Tensor
    high: torch.Tensor
    id: str


@dataclass
class DatasetSplit:
    name: str
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)


def load_image(path, size=None) -> torch.Tensor:
    """8-bit RGB file -> float32 CHW tensor in [0,1]; optional (H,W) resize."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None:
            im = im.resize((size[1], size[0]), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image(path, tensor) -> None:
    """CHW (3 or 1 channel) tensor -> 8-bit file, round-half-up quantization."""
    t = tensor.detach().cpu()
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise DatasetError(f"cannot save a batch of {t.shape[0]} images")
        t = t[0]
    if t.dim() == 2:
        t = t[None]
    arr = t.clamp(0.0, 1.0).numpy()
    q = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    if q.shape[0] == 1:
        Image.fromarray(q[0], mode="L").save(path)
    elif q.shape[0] == 3:
        Image.fromarray(np.transpose(q, (1, 2, 0)), mode="RGB").save(path)
    else:
        raise DatasetError(f"cannot save a {q.shape[0]}-channel image")


def pad_to_multiple(t: torch.Tensor, multiple: int = 4):
    """Reflection-pad CHW right/bottom to dims divisible by `multiple`.

    Returns (padded, (native_h, native_w)) for later cropping.
    """
    h, w = t.shape[-2], t.shape[-1]
    ph = (multiple - h % multiple) % multiple
    pw = (multiple - w % multiple) % multiple
    if ph == 0 and pw == 0:
        return t, (h, w)
    batched = t if t.dim() == 4 else t[None]
    padded = F.pad(batched, (0, pw, 0, ph), mode="reflect")
    return (padded if t.dim() == 4 else padded[0]), (h, w)


def crop_to(t: torch.Tensor, hw) -> torch.Tensor:
    h, w = hw
    return t[..., :h, :w]


def _index_stems(directory: Path) -> dict:
    files = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS:
            files[p.stem] = p
    return files


def _load_pairs(low_dir: Path, high_dir: Path) -> list:
    if not low_dir.is_dir() or not high_dir.is_dir():
        raise DatasetError(
            f"expected image directories {low_dir} and {high_dir}")
    lows = _index_stems(low_dir)
    highs = _index_stems(high_dir)
    for stem in sorted(set(lows) ^ set(highs)):
        side = "low" if stem in lows else "high"
        warnings.warn(f"unmatched stem '{stem}' only present in {side}/, "
                      f"excluding it")
    pairs = []
    for stem in sorted(set(lows) & set(highs)):
        pairs.append(PairedSample(
            low=load_image(lows[stem]),
            high=load_image(highs[stem]),
            id=stem,
        ))
    return pairs


def _resized_pairs(pairs, size):
    if size is None:
        return pairs
    return [PairedSample(low=_resize(p.low, size), high=_resize(p.high, size),
                         id=p.id) for p in pairs]


def load_dataset(root, name: str = "custom",
                 train_size=(224, 224)) -> DatasetSplit:
    """Build a DatasetSplit from either supported directory layout.

    train_size resizes training pairs ((H,W) or None for native); test
    pairs always stay native.
    """
    if name != "custom" and name not in NAMED_SPLITS:
        raise DatasetError(
            f"unknown dataset name {name!r}; valid: "
            f"{sorted(NAMED_SPLITS) + ['custom']}")
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")

    if (root / "train").is_dir() or (root / "test").is_dir():
        train = _resized_pairs(
            _load_pairs(root / "train" / "low", root / "train" / "high"),
            train_size)
        test = _load_pairs(root / "test" / "low", root / "test" / "high")
        if not train and not test:
            raise DatasetError(f"no image pairs found under {root}")
        if name in NAMED_SPLITS:
            want = NAMED_SPLITS[name]
            if (len(train), len(test)) != want:
                raise DatasetError(
                    f"{name} expects {want[0]}:{want[1]} pairs, found "
                    f"{len(train)}:{len(test)}")
        return DatasetSplit(name=name, train=train, test=test)

    pairs = _load_pairs(root / "low", root / "high")
    if not pairs:
        raise DatasetError(f"no image pairs found under {root}")
    if name in NAMED_SPLITS:
        n_train, n_test = NAMED_SPLITS[name]
        if len(pairs) != n_train + n_test:
            raise DatasetError(
                f"{name} expects {n_train + n_test} pairs "
                f"({n_train}:{n_test}), found {len(pairs)}")
        train_raw, test = pairs[:n_train], pairs[n_train:]
    else:
        train_raw, test = pairs, []
    return DatasetSplit(name=name, train=_resized_pairs(train_raw, train_size),
                        test=test)


def _resize(t: torch.Tensor, size) -> torch.Tensor:
    if t.shape[-2:] == tuple(size):
        return t
    return F.interpolate(t[None], size=tuple(size), mode="bilinear",
                         align_corners=False)[0]
