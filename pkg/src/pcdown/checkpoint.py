"""Binary checkpoints: sampler + head weights and the config that built them.

Layout (little-endian):
    magic  b"MOPS1"
    uint32 format version (currently 1)
    uint32 config byte length, then the key=value config text (utf-8)
    uint32 number of named blobs
    per blob: uint16 name length, name (utf-8), uint8 ndim,
              ndim * uint32 dims, float32 payload

Every tensor is stored as float32; integer buffers (e.g. BatchNorm's
num_batches_tracked) survive the round trip because loading casts back to
the dtype already present in the receiving module.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, config_from_text, config_to_text
from .errors import ConfigurationError

__all__ = ["save_checkpoint", "load_checkpoint", "save_model", "load_into_modules"]

MAGIC = b"MOPS1"
VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray], config: RunConfig) -> None:
    cfg_bytes = config_to_text(config).encode()
    chunks = [MAGIC, struct.pack("<II", VERSION, len(cfg_bytes)), cfg_bytes]
    chunks.append(struct.pack("<I", len(params)))
    for name in sorted(params):
        # asarray rather than ascontiguousarray: the latter promotes 0-dim
        # scalars to shape (1,); tobytes() below emits C order regardless
        arr = np.asarray(params[name], dtype="<f4")
        name_b = name.encode()
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], RunConfig]:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ConfigurationError(f"{path}: bad checkpoint magic {data[:5]!r}")
    version, cfg_len = struct.unpack_from("<II", data, 5)
    if version != VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {version}")
    offset = 13
    config = config_from_text(data[offset : offset + cfg_len].decode())
    offset += cfg_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode()
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
        params[name] = arr.copy()
    if offset != len(data):
        raise ConfigurationError(f"{path}: {len(data) - offset} trailing bytes")
    return params, config


def save_model(path, config: RunConfig, sampler: torch.nn.Module, head: torch.nn.Module) -> None:
    """Store sampler.* and head.* state dicts in one checkpoint."""
    params: dict[str, np.ndarray] = {}
    for prefix, module in (("sampler", sampler), ("head", head)):
        for name, tensor in module.state_dict().items():
            params[f"{prefix}.{name}"] = tensor.detach().cpu().numpy().astype(np.float32)
    save_checkpoint(path, params, config)


def load_into_modules(
    params: dict[str, np.ndarray], sampler: torch.nn.Module, head: torch.nn.Module
) -> None:
    """Push prefixed float32 blobs back into freshly-built modules, casting
    each blob to the dtype the module already uses."""
    for prefix, module in (("sampler", sampler), ("head", head)):
        state = module.state_dict()
        new_state = {}
        for name, tensor in state.items():
            key = f"{prefix}.{name}"
            if key not in params:
                raise ConfigurationError(f"checkpoint is missing parameter {key}")
            blob = params[key]
            if tuple(blob.shape) != tuple(tensor.shape):
                raise ConfigurationError(
                    f"{key}: shape {blob.shape} does not match module {tuple(tensor.shape)}"
                )
            new_state[name] = torch.from_numpy(blob.copy()).to(tensor.dtype)
        module.load_state_dict(new_state)
