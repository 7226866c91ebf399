"""Binary container for named float64 arrays.

Layout: magic ``PASD``, format version (u32 LE), then one record per
array: name length (u16 LE), UTF-8 name, rank (u8), dims (u64 LE each),
payload (little-endian f64, row-major).  Records are written in sorted
name order so identical contents produce identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"PASD"
VERSION = 1


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype=np.float64)  # keeps rank-0 scalars rank 0
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointError(f"parameter name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"rank {arr.ndim} exceeds container limit")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.astype("<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def load_arrays(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes, not a parameter container")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    out: dict[str, np.ndarray] = {}
    offset = 8
    total = len(raw)
    while offset < total:
        try:
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("B", raw, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}Q", raw, offset)
            offset += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy()
            offset += 8 * count
        except (struct.error, UnicodeDecodeError, ValueError) as e:
            raise CheckpointError(f"{path}: truncated or corrupt record at byte {offset}") from e
        out[name] = arr.reshape(dims) if rank else arr.reshape(())
    return out
