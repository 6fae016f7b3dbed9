"""Writer for the EMB1 embedding file format consumed by the rotalign toolkit.

Layout (little-endian throughout): magic ``EMB1``, u32 version 1, u32 N,
u32 d, u32 metadata length, that many bytes of UTF-8 JSON
(``{"model", "angle", "rotation_augmented"}``), then N*d float32 values
row-major.
"""

import json
import struct

import numpy as np

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_embeddings_file(path, vectors, model: str, angle: int,
                          rotation_augmented: bool = False) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
    n, d = vectors.shape
    if n < 2:
        raise ValueError(f"EMB1 requires at least 2 rows, got {n}")
    if not np.isfinite(vectors).all():
        raise ValueError("vectors contain non-finite values")
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    if (norms == 0.0).any():
        raise ValueError(f"row {int(np.flatnonzero(norms == 0.0)[0])} has zero norm")
    meta = json.dumps(
        {"model": model, "angle": int(angle), "rotation_augmented": bool(rotation_augmented)},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, d, len(meta)))
        f.write(meta)
        f.write(vectors.tobytes())
