"""Binary checkpoints: model config, parameters, kernel state, optimizer.

File layout: magic "CFCV", u32 version=1, u32 metadata length, UTF-8
JSON metadata (config, counters, and a section table), then the raw
little-endian array blobs in section-table order. Blobs are stored as
64-bit floats so a load reproduces the in-memory model bit for bit and
a save -> load -> save round trip is byte-identical.
"""

from __future__ import annotations

import json
import struct

import numpy as np

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"CFCV"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


class CheckpointError(ValueError):
    """The checkpoint file is malformed or from an unknown version."""


def _sections(model, optimizer):
    entries = []
    for pid, arr in model.parameters().items():
        entries.append((f"param.{pid}", arr))
    for i, layer in enumerate(model.conv_layers):
        if hasattr(layer, "state"):
            entries.append((f"state.{layer.name}.re", layer.state.re_plane))
            entries.append((f"state.{layer.name}.im", layer.state.im_plane))
    if optimizer is not None:
        for pid in model.parameters():
            if pid in optimizer.m:
                entries.append((f"adam.m.{pid}", optimizer.m[pid]))
                entries.append((f"adam.v.{pid}", optimizer.v[pid]))
    return entries


def save_checkpoint(path, model, optimizer=None, next_step=0):
    entries = _sections(model, optimizer)
    table = [{"name": name, "shape": list(arr.shape)} for name, arr in entries]
    meta = {
        "config": model.config.to_dict(),
        "step_counters": [
            getattr(getattr(layer, "state", None), "step_counter", 0)
            for layer in model.conv_layers
        ],
        "adam_t": 0 if optimizer is None else optimizer.t,
        "has_optimizer": optimizer is not None,
        "next_step": int(next_step),
        "sections": table,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, build_model, make_optimizer=None):
    """Rebuild a model (and optionally its optimizer) from a checkpoint.

    ``build_model`` maps a config dict to a fresh model; sections are
    then copied over its arrays. Returns (model, optimizer, meta).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"{path}: file too short for header")
    magic, version, meta_len = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        meta = json.loads(raw[_PREFIX.size:_PREFIX.size + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt metadata ({exc})") from exc
    model = build_model(meta["config"])
    optimizer = None
    if meta.get("has_optimizer") and make_optimizer is not None:
        optimizer = make_optimizer(meta["config"])
        optimizer.t = int(meta.get("adam_t", 0))

    params = model.parameters()
    targets = {f"param.{pid}": arr for pid, arr in params.items()}
    for i, layer in enumerate(model.conv_layers):
        if hasattr(layer, "state"):
            layer.state.step_counter = int(meta["step_counters"][i])
            targets[f"state.{layer.name}.re"] = layer.state.re_plane
            targets[f"state.{layer.name}.im"] = layer.state.im_plane

    off = _PREFIX.size + meta_len
    for section in meta["sections"]:
        name = section["name"]
        shape = tuple(section["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated blob for section {name!r}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
        off += nbytes
        if name in targets:
            target = targets[name]
            if target.shape != arr.shape:
                raise CheckpointError(
                    f"{path}: section {name!r} has shape {arr.shape}, "
                    f"expected {target.shape}"
                )
            target[...] = arr
        elif name.startswith("adam.m."):
            if optimizer is not None:
                optimizer.m[name[len("adam.m."):]] = arr.copy()
        elif name.startswith("adam.v."):
            if optimizer is not None:
                optimizer.v[name[len("adam.v."):]] = arr.copy()
        else:
            raise CheckpointError(f"{path}: unknown section {name!r}")
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes after sections")
    return model, optimizer, meta
