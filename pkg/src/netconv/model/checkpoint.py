"""Binary checkpoint files.

Layout (little-endian): ``b"NCKP"``, version u32, u32 length + UTF-8 JSON
(``{"model": ..., "meta": ...}``), then repeated tensor records: u16 name
length + UTF-8 name, dtype u8 (0 = f32), rank u8, rank x u32 dims, f32 payload.

Tensors whose names start with ``opt.`` are optimizer state, not parameters.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from netconv.model.config import ModelConfig
from netconv.model.params import ParameterStore
from netconv.tensor import Tensor

MAGIC = b"NCKP"
VERSION = 1
DTYPE_F32 = 0
OPT_PREFIX = "opt."


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    store: ParameterStore
    meta: dict = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)


def _write_tensor(fh, name: str, arr: np.ndarray):
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def save_checkpoint(path, store: ParameterStore, meta: dict | None = None, extra: dict | None = None) -> None:
    header = json.dumps({"model": store.config.to_dict(), "meta": meta or {}}, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for name, t in store.items():
            _write_tensor(fh, name, t.data)
        for name, arr in (extra or {}).items():
            _write_tensor(fh, OPT_PREFIX + name if not name.startswith(OPT_PREFIX) else name, np.asarray(arr))
    tmp.replace(path)


def _read_exact(fh, n: int) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise CheckpointError("truncated checkpoint")
    return b


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        version, hlen = struct.unpack("<II", _read_exact(fh, 8))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(_read_exact(fh, hlen).decode("utf-8"))
        config = ModelConfig.from_dict(header["model"])
        tensors, extra = {}, {}
        while True:
            b = fh.read(2)
            if not b:
                break
            if len(b) != 2:
                raise CheckpointError("truncated checkpoint")
            (nlen,) = struct.unpack("<H", b)
            name = _read_exact(fh, nlen).decode("utf-8")
            dtype, rank = struct.unpack("<BB", _read_exact(fh, 2))
            if dtype != DTYPE_F32:
                raise CheckpointError(f"{path}: unsupported dtype code {dtype} for {name}")
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").astype(np.float32).reshape(dims)
            if name.startswith(OPT_PREFIX):
                extra[name] = arr
            else:
                tensors[name] = Tensor(arr, requires_grad=not name.startswith("cls.norm."), dtype=np.float32)
    return Checkpoint(ParameterStore(config, tensors), header.get("meta", {}), extra)
