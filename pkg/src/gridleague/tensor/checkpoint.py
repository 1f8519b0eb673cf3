"""Binary checkpoint format shared by all trained networks.

Layout (little-endian):
  magic "LFCKPT1" | u64 architecture hash | u64 parameter count | u64 version
  then per parameter: u32 name length | name utf-8 | u32 rank | u32 dims... |
  raw float32 data (row-major).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LFCKPT1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: dict, arch_hash: int, version: int) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<QQQ", arch_hash, len(params), version)]
    for name, value in params.items():
        data = value.data if hasattr(value, "data") else np.asarray(value)
        arr = np.ascontiguousarray(data, dtype="<f4")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path, expected_arch_hash: int | None = None):
    """Returns (params: dict[str, float32 ndarray], arch_hash, version)."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = len(MAGIC)
    arch_hash, count, version = struct.unpack_from("<QQQ", raw, off)
    off += 24
    if expected_arch_hash is not None and arch_hash != expected_arch_hash:
        raise CheckpointError(
            f"{path}: architecture hash mismatch "
            f"(file {arch_hash:#018x}, expected {expected_arch_hash:#018x})"
        )
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(dims)
        off += 4 * n
        params[name] = arr.copy()
    if off != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after last parameter")
    return params, arch_hash, version


def peek_version(path) -> int:
    raw = Path(path).open("rb").read(len(MAGIC) + 24)
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    _, _, version = struct.unpack_from("<QQQ", raw, len(MAGIC))
    return version
