"""Binary store for model-ready segment bundles.

Layout: magic b"RRS1", then per record: u32 subject-id length + UTF-8 bytes,
u32 segment-id length + UTF-8 bytes, 3 x 3200 float32 channel payload (C
order), one float32 label (NaN when no reference exists). Little-endian
throughout. Channels are float32 on disk for size; compute happens in
float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import LabeledSet
from .signals import SEGMENT_SAMPLES

MAGIC = b"RRS1"
_CHANNELS = 3


def write_store(path, records: list[tuple[str, str, np.ndarray, float]]) -> None:
    """records: (subject, segment_id, channels (3, 3200), label-or-nan)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for subject, seg_id, channels, label in records:
            channels = np.ascontiguousarray(channels, dtype="<f4")
            if channels.shape != (_CHANNELS, SEGMENT_SAMPLES):
                raise ValueError(f"record {subject}/{seg_id} has shape {channels.shape}")
            for text in (subject, seg_id):
                b = text.encode("utf-8")
                fh.write(struct.pack("<I", len(b)))
                fh.write(b)
            fh.write(channels.tobytes())
            fh.write(struct.pack("<f", float(label)))


def read_store(path) -> LabeledSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a segment store (bad magic {blob[:4]!r})")
    off = 4
    total = len(blob)
    payload = 4 * _CHANNELS * SEGMENT_SAMPLES

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > total:
            raise ValueError(f"{path}: truncated segment store")
        piece = blob[off : off + n]
        off += n
        return piece

    xs, ys, subjects, ids = [], [], [], []
    while off < total:
        (n_sub,) = struct.unpack("<I", take(4))
        subject = take(n_sub).decode("utf-8")
        (n_seg,) = struct.unpack("<I", take(4))
        seg_id = take(n_seg).decode("utf-8")
        channels = np.frombuffer(take(payload), dtype="<f4").reshape(_CHANNELS, SEGMENT_SAMPLES)
        (label,) = struct.unpack("<f", take(4))
        xs.append(channels.astype(np.float64))
        ys.append(label)
        subjects.append(subject)
        ids.append(seg_id)
    if not xs:
        raise ValueError(f"{path}: empty segment store")
    return LabeledSet(np.stack(xs), np.asarray(ys, dtype=np.float64), subjects, ids)
