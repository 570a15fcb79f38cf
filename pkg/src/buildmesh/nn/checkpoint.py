"""Binary checkpoint format.

Layout: magic string, format version, JSON-encoded model config, then the
named parameter blobs as little-endian 32-bit floats. The loader verifies
the magic, the version, and every parameter shape against the model built
from the embedded config.
"""

import json
import struct

import numpy as np
import torch

from ..errors import CheckpointError
from .config import ModelConfig

MAGIC = b"BMESHCKPT"
VERSION = 1


def save_checkpoint(path, config, modules):
    """Write the named state dicts of `modules` (a dict of nn.Modules)."""
    entries = []
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            entries.append((f"{prefix}.{name}", tensor.detach().cpu().numpy()))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        config_blob = json.dumps(config.to_dict()).encode()
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            name_b = name.encode()
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.astype("<f4").tobytes())


def _read(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def read_checkpoint(path):
    """Parse a checkpoint into (config, {name: float32 array})."""
    with open(path, "rb") as fh:
        if _read(fh, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError("bad magic string")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", _read(fh, 4, "config length"))
        config = ModelConfig.from_dict(json.loads(_read(fh, clen, "config")))
        (count,) = struct.unpack("<I", _read(fh, 4, "entry count"))
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", _read(fh, 4, "name length"))
            name = _read(fh, nlen, "name").decode()
            (ndim,) = struct.unpack("<I", _read(fh, 4, "rank"))
            shape = struct.unpack(f"<{ndim}q", _read(fh, 8 * ndim, "shape"))
            size = int(np.prod(shape)) if ndim else 1
            blob = _read(fh, 4 * size, f"data for {name}")
            params[name] = np.frombuffer(blob, dtype="<f4").reshape(shape).copy()
    return config, params


def load_checkpoint(path, modules):
    """Load parameters into `modules` (a dict of nn.Modules); returns config.

    Every blob must match an existing parameter's shape; missing or extra
    names are errors.
    """
    config, params = read_checkpoint(path)
    expected = {}
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            expected[f"{prefix}.{name}"] = tensor
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing:
        raise CheckpointError(f"missing parameter {missing[0]}")
    if extra:
        raise CheckpointError(f"unexpected parameter {extra[0]}")
    for name, arr in params.items():
        target = expected[name]
        if tuple(arr.shape) != tuple(target.shape):
            raise CheckpointError(
                f"shape mismatch for {name}: "
                f"{tuple(arr.shape)} vs {tuple(target.shape)}"
            )
        with torch.no_grad():
            target.copy_(torch.from_numpy(arr).to(target.dtype))
    return config
