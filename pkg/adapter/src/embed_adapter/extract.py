"""The extraction pipeline: patches -> rotation grid -> batched encoding -> EMB1.

Input is a patch directory produced by ``rotalign patches`` (PNG files plus a
``*_patches.json`` index).  For every grid angle the same patches are rotated,
encoded, and written as one EMB1 file; row i of every file comes from the same
source patch, so downstream comparisons pair rows by index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .emb1 import write_embeddings_file
from .encoders import ModelHandle
from .errors import AdapterError
from .rotation import rotate_patch


@dataclass(frozen=True)
class AngleGrid:
    angles: tuple[int, ...]


def parse_angle_grid(spec: str) -> AngleGrid:
    """Parse ``start:end:step`` into the half-open grid [start, end)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise AdapterError("angle grid", f"expected start:end:step, got {spec!r}")
    try:
        start, end, step = (int(p) for p in parts)
    except ValueError:
        raise AdapterError("angle grid", f"parts must be integers: {spec!r}") from None
    if step <= 0 or end <= start or (end - start) % step != 0 or end > 360:
        raise AdapterError("angle grid", f"invalid grid {spec!r}")
    angles = tuple(range(start, end, step))
    if 0 not in angles:
        raise AdapterError("angle grid", "grid must include the control angle 0")
    return AngleGrid(angles=angles)


def load_patch_stack(patch_dir) -> tuple[np.ndarray, list[str]]:
    """Load all patches listed in the directory's index, in index order."""
    patch_dir = Path(patch_dir)
    indexes = sorted(patch_dir.glob("*_patches.json"))
    if not indexes:
        raise AdapterError("patch index", f"no *_patches.json found in {patch_dir}")
    if len(indexes) > 1:
        names = ", ".join(p.name for p in indexes)
        raise AdapterError("patch index", f"ambiguous patch indexes: {names}")
    try:
        index = json.loads(indexes[0].read_text(encoding="utf-8"))
        records = index["patches"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise AdapterError("patch index", f"{indexes[0]}: {exc}") from exc
    if len(records) < 2:
        raise AdapterError(
            "patch index",
            f"need at least 2 patches for downstream comparison, got {len(records)}",
        )
    images = []
    names = []
    for rec in records:
        path = patch_dir / rec["file"]
        try:
            with Image.open(path) as img:
                images.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
        except OSError as exc:
            raise AdapterError("patch load", f"{path}: {exc}") from exc
        names.append(rec["file"])
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise AdapterError("patch load", f"patches disagree on shape: {sorted(shapes)}")
    return np.stack(images), names


def _encode_stack(handle: ModelHandle, stack: np.ndarray) -> np.ndarray:
    outputs = []
    for start in range(0, stack.shape[0], handle.batch_size):
        batch = stack[start:start + handle.batch_size]
        try:
            vectors = np.asarray(handle.encode(batch), dtype=np.float32)
        except Exception as exc:
            raise AdapterError("inference", f"{handle.model_id}: {exc}") from exc
        if vectors.shape != (batch.shape[0], handle.dim):
            raise AdapterError(
                "inference",
                f"{handle.model_id} returned shape {vectors.shape}, "
                f"expected {(batch.shape[0], handle.dim)}",
            )
        outputs.append(vectors)
    return np.concatenate(outputs, axis=0)


def extract(handle: ModelHandle, patch_dir, grid: AngleGrid, out_dir,
            rotation_augmented: bool = False) -> dict:
    """Run the rotation sweep and write one EMB1 file per grid angle.

    Returns the manifest fragment (also written as ``{model}_fragment.json``)
    that the rotalign manifest's ``entries`` list accepts verbatim.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack, _ = load_patch_stack(patch_dir)
    paths: dict[int, str] = {}
    for angle in grid.angles:
        if angle == 0:
            rotated = stack
        else:
            rotated = np.stack([rotate_patch(img, angle) for img in stack])
        vectors = _encode_stack(handle, rotated)
        name = f"{handle.model_id}_angle{angle}.emb"
        try:
            write_embeddings_file(
                out_dir / name, vectors,
                model=handle.model_id, angle=angle,
                rotation_augmented=rotation_augmented,
            )
        except (OSError, ValueError) as exc:
            raise AdapterError("embedding write", f"{name}: {exc}") from exc
        paths[angle] = name
    fragment = {
        "model_name": handle.model_id,
        "rotation_augmented": rotation_augmented,
        "embedding_paths": {str(a): p for a, p in sorted(paths.items())},
    }
    fragment_path = out_dir / f"{handle.model_id}_fragment.json"
    fragment_path.write_text(
        json.dumps(fragment, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return fragment
