"""Binary tensor-dictionary file format.

Layout: magic b"RRF1", then per tensor: u32 name length, UTF-8 name, u32
rank, rank x u64 dims, float64 little-endian payload in C order. Record order
is the dict's insertion order, so writes are deterministic.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RRF1"


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in arrays.items():
            # asarray keeps rank-0 inputs rank 0; ascontiguousarray would
            # promote them to shape (1,) and break the round trip
            arr = np.asarray(arr, dtype="<f8", order="C")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<I", arr.ndim))
            if arr.ndim:
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor file (bad magic {blob[:4]!r})")
    out: dict[str, np.ndarray] = {}
    off = 4
    total = len(blob)

    def take(nbytes: int) -> bytes:
        nonlocal off
        if off + nbytes > total:
            raise ValueError(f"{path}: truncated tensor file")
        piece = blob[off : off + nbytes]
        off += nbytes
        return piece

    while off < total:
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        count = int(np.prod(dims)) if rank else 1
        payload = take(8 * count)
        out[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    return out
