"""Binary named-array container and model checkpoints.

File layout (all little-endian):

    bytes 0..7   magic b"RELIGHT1"
    bytes 8..11  uint32 header length in bytes
    header       canonical JSON (sorted keys, compact separators) holding
                 caller metadata plus an "arrays" index: for each array its
                 name, kind, dtype string (numpy convention, e.g. "<f4"),
                 shape and byte count, in payload order
    payload      the arrays' raw bytes, concatenated in index order

The header is canonical and the payload order is the model's declaration
order, so save -> load -> save reproduces the file byte for byte.

Model checkpoints store parameters (kind "param", float32), buffers (kind
"buffer", e.g. batch-norm statistics) and, when an optimizer is attached,
AdamW first/second moments (kinds "adam_m"/"adam_v") named after their
parameter. The header carries the model config, epoch, seed and optimizer
step count.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import ModelConfig
from .exceptions import CheckpointError

MAGIC = b"RELIGHT1"
FORMAT_VERSION = 1
_MAX_HEADER = 1 << 26


def write_arrays(path, arrays, meta: dict) -> None:
    """arrays: iterable of (name, kind, numpy array); meta: JSON scalars."""
    index = []
    chunks = []
    for name, kind, arr in arrays:
        arr = np.asarray(arr)
        shape = list(arr.shape)
        arr = np.ascontiguousarray(arr)  # may promote 0-dim to 1-dim
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        index.append({"name": name, "kind": kind, "dtype": arr.dtype.str,
                      "shape": shape, "nbytes": len(raw)})
        chunks.append(raw)
    header = dict(meta)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = index
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for raw in chunks:
            f.write(raw)


def read_arrays(path):
    """Returns (meta dict without the index, list of (name, kind, array))."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC))
    if hlen > _MAX_HEADER or len(MAGIC) + 4 + hlen > len(data):
        raise CheckpointError(f"{path}: header length {hlen} exceeds file size")
    start = len(MAGIC) + 4
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {header.get('format_version')}")
    index = header.pop("arrays", None)
    if index is None:
        raise CheckpointError(f"{path}: header has no array index")
    payload = data[start + hlen:]
    expected = sum(e["nbytes"] for e in index)
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: payload truncated or padded: expected {expected} "
            f"bytes, got {len(payload)}")
    arrays = []
    offset = 0
    for e in index:
        raw = payload[offset:offset + e["nbytes"]]
        offset += e["nbytes"]
        arr = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"])
        arrays.append((e["name"], e["kind"], arr.copy()))
    return header, arrays


@dataclass
class Checkpoint:
    model_config: dict
    epoch: int
    seed: int
    optimizer_step: int
    params: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)


def _optimizer_arrays(model, optimizer):
    """Per-parameter AdamW moments in parameter declaration order."""
    if optimizer is None:
        return [], 0
    state_by_param = {id(p): optimizer.state[p]
                      for group in optimizer.param_groups
                      for p in group["params"] if p in optimizer.state}
    arrays = []
    step = 0
    for name, p in model.named_parameters():
        st = state_by_param.get(id(p))
        if st is None:
            continue
        step = int(st["step"].item() if torch.is_tensor(st["step"]) else st["step"])
        arrays.append((name, "adam_m",
                       st["exp_avg"].detach().cpu().numpy().astype("<f4")))
        arrays.append((name, "adam_v",
                       st["exp_avg_sq"].detach().cpu().numpy().astype("<f4")))
    return arrays, step


def save_checkpoint(path, model, optimizer=None, epoch: int = 0,
                    seed: int = 0) -> None:
    arrays = []
    for name, p in model.named_parameters():
        arrays.append((name, "param", p.detach().cpu().numpy().astype("<f4")))
    for name, b in model.named_buffers():
        arr = b.detach().cpu().numpy()
        arr = arr.astype("<i8") if arr.dtype.kind in "iu" else arr.astype("<f4")
        arrays.append((name, "buffer", arr))
    opt_arrays, step = _optimizer_arrays(model, optimizer)
    arrays.extend(opt_arrays)
    meta = {
        "kind": "model-checkpoint",
        "model_config": model.config.to_dict(),
        "epoch": int(epoch),
        "seed": int(seed),
        "optimizer_step": int(step),
    }
    write_arrays(path, arrays, meta)


def load_checkpoint(path) -> Checkpoint:
    meta, arrays = read_arrays(path)
    if meta.get("kind") != "model-checkpoint":
        raise CheckpointError(
            f"{path}: not a model checkpoint (kind={meta.get('kind')!r})")
    ckpt = Checkpoint(
        model_config=meta["model_config"],
        epoch=int(meta["epoch"]),
        seed=int(meta["seed"]),
        optimizer_step=int(meta["optimizer_step"]),
    )
    bucket = {"param": ckpt.params, "buffer": ckpt.buffers,
              "adam_m": ckpt.adam_m, "adam_v": ckpt.adam_v}
    for name, kind, arr in arrays:
        if kind not in bucket:
            raise CheckpointError(f"{path}: unknown array kind {kind!r}")
        bucket[kind][name] = arr
    return ckpt


def restore_checkpoint(path, model, optimizer=None) -> Checkpoint:
    """Load a checkpoint into an existing model (and optionally optimizer).

    The stored model config must equal the model's own config, and the
    parameter/buffer name and shape sets must match exactly.
    """
    ckpt = load_checkpoint(path)
    own_cfg = model.config.to_dict()
    if ckpt.model_config != own_cfg:
        diffs = sorted(k for k in set(own_cfg) | set(ckpt.model_config)
                       if own_cfg.get(k) != ckpt.model_config.get(k))
        raise CheckpointError(
            f"{path}: checkpoint config does not match the model; "
            f"differing keys: {diffs}")

    model_params = dict(model.named_parameters())
    if set(model_params) != set(ckpt.params):
        missing = sorted(set(model_params) - set(ckpt.params))
        extra = sorted(set(ckpt.params) - set(model_params))
        raise CheckpointError(
            f"{path}: parameter names do not match the model "
            f"(missing {missing}, unexpected {extra})")
    model_buffers = dict(model.named_buffers())
    if set(model_buffers) != set(ckpt.buffers):
        missing = sorted(set(model_buffers) - set(ckpt.buffers))
        extra = sorted(set(ckpt.buffers) - set(model_buffers))
        raise CheckpointError(
            f"{path}: buffer names do not match the model "
            f"(missing {missing}, unexpected {extra})")

    with torch.no_grad():
        for name, p in model_params.items():
            arr = ckpt.params[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"{path}: shape mismatch for {name}: checkpoint "
                    f"{tuple(arr.shape)} vs model {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))
        for name, b in model_buffers.items():
            arr = ckpt.buffers[name]
            if tuple(arr.shape) != tuple(b.shape):
                raise CheckpointError(
                    f"{path}: shape mismatch for buffer {name}: checkpoint "
                    f"{tuple(arr.shape)} vs model {tuple(b.shape)}")
            b.copy_(torch.from_numpy(arr).to(b.dtype))

    if optimizer is not None and ckpt.adam_m:
        by_name = {name: p for name, p in model_params.items()}
        for name, m_arr in ckpt.adam_m.items():
            p = by_name.get(name)
            if p is None:
                raise CheckpointError(
                    f"{path}: optimizer state for unknown parameter {name}")
            optimizer.state[p] = {
                "step": torch.tensor(float(ckpt.optimizer_step)),
                "exp_avg": torch.from_numpy(ckpt.adam_m[name]).clone(),
                "exp_avg_sq": torch.from_numpy(ckpt.adam_v[name]).clone(),
            }
    return ckpt
