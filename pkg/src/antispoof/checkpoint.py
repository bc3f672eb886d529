"""Parameter checkpoints: one zip archive of .npy entries plus a JSON header.

The writer fixes every zip timestamp and stores entries uncompressed, so the
same parameters always produce byte-identical files. Loading validates each
array's shape against the receiving model before any tensor is touched.
"""

from __future__ import annotations

import io
import json
import os
import zipfile
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ShapeError

_EPOCH = (1980, 1, 1, 0, 0, 0)
META_NAME = "meta.json"


def _write_entry(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    # asarray keeps 0-d arrays 0-d where ascontiguousarray would promote them
    np.lib.format.write_array(buf, np.asarray(array, order="C"), allow_pickle=False)
    return buf.getvalue()


@dataclass
class Checkpoint:
    meta: dict
    arrays: dict[str, np.ndarray]          # "group/param" -> array
    buffers: dict[str, np.ndarray]         # normalization running statistics
    optimizer: dict[str, np.ndarray]       # velocity buffers, may be empty

    @property
    def step(self) -> int:
        return int(self.meta.get("step", 0))


def save_checkpoint(path, model, step: int = 0, optimizer_state=None,
                    extra_meta: dict | None = None) -> None:
    """Serialize every named parameter group of ``model`` atomically."""
    groups = model.param_groups()
    meta = {
        "format_version": 1,
        "profile": model.profile.name,
        "input_size": list(model.profile.input_size),
        "embedding_dim": model.profile.embedding_dim,
        "sequence_length": model.profile.sequence_length,
        "variant": model.variant.name,
        "num_domains": model.num_domains,
        "step": step,
        "groups": {g: {n: list(p.shape) for n, p in params.items()}
                   for g, params in groups.items()},
    }
    if extra_meta:
        meta.update(extra_meta)

    buffers = model.buffer_groups()
    path = os.fspath(path)
    tmp = path + ".tmp"
    with zipfile.ZipFile(tmp, "w", zipfile.ZIP_STORED) as zf:
        _write_entry(zf, META_NAME, json.dumps(meta, sort_keys=True, indent=1).encode())
        for group in sorted(groups):
            for name in sorted(groups[group]):
                array = groups[group][name].detach().cpu().numpy()
                _write_entry(zf, f"params/{group}/{name}.npy", _npy_bytes(array))
        for group in sorted(buffers):
            for name in sorted(buffers[group]):
                array = buffers[group][name].detach().cpu().numpy()
                _write_entry(zf, f"buffers/{group}/{name}.npy", _npy_bytes(array))
        if optimizer_state:
            for name in sorted(optimizer_state):
                array = optimizer_state[name].detach().cpu().numpy()
                _write_entry(zf, f"optimizer/{name}.npy", _npy_bytes(array))
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    arrays: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    optimizer: dict[str, np.ndarray] = {}
    with zipfile.ZipFile(os.fspath(path)) as zf:
        meta = json.loads(zf.read(META_NAME))
        for entry in zf.namelist():
            if entry == META_NAME:
                continue
            payload = io.BytesIO(zf.read(entry))
            array = np.lib.format.read_array(payload, allow_pickle=False)
            if entry.startswith("params/"):
                arrays[entry[len("params/"):-len(".npy")]] = array
            elif entry.startswith("buffers/"):
                buffers[entry[len("buffers/"):-len(".npy")]] = array
            elif entry.startswith("optimizer/"):
                optimizer[entry[len("optimizer/"):-len(".npy")]] = array
    return Checkpoint(meta=meta, arrays=arrays, buffers=buffers, optimizer=optimizer)


def apply_checkpoint(model, ckpt: Checkpoint) -> None:
    """Copy checkpoint arrays into ``model``, validating shapes first."""
    if ckpt.meta.get("profile") != model.profile.name:
        raise ShapeError(
            f"checkpoint was written for profile {ckpt.meta.get('profile')!r}, "
            f"model uses {model.profile.name!r}")
    groups = model.param_groups()
    expected = {f"{g}/{n}": tuple(p.shape)
                for g, params in groups.items() for n, p in params.items()}
    if set(expected) != set(ckpt.arrays):
        missing = sorted(set(expected) - set(ckpt.arrays))
        surplus = sorted(set(ckpt.arrays) - set(expected))
        raise ShapeError(
            f"checkpoint groups do not match model: missing={missing[:4]} "
            f"surplus={surplus[:4]}")
    for key, shape in expected.items():
        got = ckpt.arrays[key].shape
        if tuple(got) != shape:
            raise ShapeError(f"checkpoint entry {key}: expected shape {shape}, got {tuple(got)}")
    with torch.no_grad():
        for group, params in groups.items():
            for name, param in params.items():
                source = torch.from_numpy(ckpt.arrays[f"{group}/{name}"])
                param.copy_(source.to(param.dtype))
        for group, buffers in model.buffer_groups().items():
            for name, buf in buffers.items():
                stored = ckpt.buffers.get(f"{group}/{name}")
                if stored is None:
                    continue
                if tuple(stored.shape) != tuple(buf.shape):
                    raise ShapeError(
                        f"checkpoint buffer {group}/{name}: expected shape "
                        f"{tuple(buf.shape)}, got {tuple(stored.shape)}")
                buf.copy_(torch.from_numpy(stored).to(buf.dtype))
