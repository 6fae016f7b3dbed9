"""Encoder handles: deterministic stubs plus presets for real pathology models.

The stub encoders make the whole bridge testable without downloading any
weights; real model identifiers are configuration presets that load lazily
through torch/transformers when that optional stack is installed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from PIL import Image

from .errors import AdapterError

DEFAULT_BATCH_SIZE = 32

# Published encoder families usable as presets.  ``repo`` is the hub id the
# transformers loader resolves; mean/std are the preprocessing constants.
PRESETS: dict[str, dict] = {
    "conch": {"repo": "MahmoodLab/CONCH", "input_size": 448, "dim": 512},
    "hibou-b": {"repo": "histai/hibou-b", "input_size": 224, "dim": 768},
    "hibou-l": {"repo": "histai/hibou-L", "input_size": 224, "dim": 1024},
    "kaiko-b": {"repo": "1aurent/vit_base_patch16_224.kaiko_ai_towards_large_pathology_fms", "input_size": 224, "dim": 768},
    "kaiko-l": {"repo": "1aurent/vit_large_patch14_reg4_dinov2.kaiko_ai_towards_large_pathology_fms", "input_size": 224, "dim": 1024},
    "pathdino": {"repo": "Saghir/PathDino", "input_size": 512, "dim": 384},
    "phikon": {"repo": "owkin/phikon", "input_size": 224, "dim": 768},
    "phikon2": {"repo": "owkin/phikon-v2", "input_size": 224, "dim": 1024},
    "prov-gigapath": {"repo": "prov-gigapath/prov-gigapath", "input_size": 224, "dim": 1536},
    "uni": {"repo": "MahmoodLab/UNI", "input_size": 224, "dim": 1024},
    "virchow": {"repo": "paige-ai/Virchow", "input_size": 224, "dim": 2560},
    "virchow2": {"repo": "paige-ai/Virchow2", "input_size": 224, "dim": 2560},
}

STUB_KINDS = ("pixels", "mean")
_STUB_THUMB = 8  # pixels stub downsamples to 8x8 before flattening


@dataclass
class ModelHandle:
    """A loaded encoder: metadata plus a batch-encode callable.

    ``encode`` maps a uint8 batch (B, H, W, 3) to float32 vectors (B, dim).
    """

    model_id: str
    dim: int
    encode: Callable[[np.ndarray], np.ndarray]
    batch_size: int = DEFAULT_BATCH_SIZE
    input_size: int | None = None
    pooling: str = "cls"
    preprocessing: dict = field(default_factory=dict)


def _resize_batch(batch: np.ndarray, size: int) -> np.ndarray:
    out = np.empty((batch.shape[0], size, size, 3), dtype=np.uint8)
    for i, img in enumerate(batch):
        out[i] = np.asarray(
            Image.fromarray(img, mode="RGB").resize((size, size), Image.BILINEAR)
        )
    return out


def _pixels_encode(batch: np.ndarray) -> np.ndarray:
    small = _resize_batch(batch, _STUB_THUMB).astype(np.float32) / 255.0
    return small.reshape(batch.shape[0], -1)


def _mean_color_encode(batch: np.ndarray) -> np.ndarray:
    return batch.astype(np.float32).mean(axis=(1, 2)) / 255.0


def stub_handle(model_id: str, kind: str = "pixels",
                batch_size: int = DEFAULT_BATCH_SIZE) -> ModelHandle:
    if kind not in STUB_KINDS:
        raise AdapterError("model load", f"unknown stub kind {kind!r}")
    if kind == "pixels":
        return ModelHandle(
            model_id=model_id,
            dim=_STUB_THUMB * _STUB_THUMB * 3,
            encode=_pixels_encode,
            batch_size=batch_size,
            input_size=_STUB_THUMB,
            preprocessing={"stub": kind},
        )
    return ModelHandle(
        model_id=model_id,
        dim=3,
        encode=_mean_color_encode,
        batch_size=batch_size,
        preprocessing={"stub": kind},
    )


def _real_handle(model_id: str, batch_size: int, pooling: str) -> ModelHandle:
    preset = PRESETS.get(model_id)
    if preset is None:
        known = ", ".join(sorted(PRESETS))
        raise AdapterError(
            "model load", f"unknown model id {model_id!r}; presets: {known}"
        )
    try:
        import torch
        from transformers import AutoImageProcessor, AutoModel
    except ImportError as exc:
        raise AdapterError(
            "model load",
            f"loading {model_id!r} needs the optional torch/transformers stack ({exc})",
        ) from exc
    try:
        processor = AutoImageProcessor.from_pretrained(preset["repo"])
        model = AutoModel.from_pretrained(preset["repo"])
    except Exception as exc:
        raise AdapterError("model load", f"{preset['repo']}: {exc}") from exc
    model.eval()

    def encode(batch: np.ndarray) -> np.ndarray:
        inputs = processor(images=list(batch), return_tensors="pt")
        with torch.no_grad():
            hidden = model(**inputs).last_hidden_state
        if pooling == "cls":
            pooled = hidden[:, 0]
        else:
            pooled = hidden.mean(dim=1)
        return pooled.cpu().numpy().astype(np.float32)

    return ModelHandle(
        model_id=model_id,
        dim=preset["dim"],
        encode=encode,
        batch_size=batch_size,
        input_size=preset["input_size"],
        pooling=pooling,
        preprocessing={"repo": preset["repo"]},
    )


def load_model(model_id: str, *, stub: bool = False, stub_kind: str = "pixels",
               batch_size: int = DEFAULT_BATCH_SIZE, pooling: str = "cls") -> ModelHandle:
    """Resolve a model id to an encoder handle.

    ``stub=True`` (or an id starting with ``stub-``) returns a deterministic
    stub encoder under the requested model name, so the pipeline runs with no
    ML dependencies.
    """
    if pooling not in ("cls", "mean"):
        raise AdapterError("model load", f"pooling must be 'cls' or 'mean', got {pooling!r}")
    if stub or model_id.startswith("stub-"):
        if model_id == "stub-mean":
            stub_kind = "mean"
        elif model_id == "stub-pixels":
            stub_kind = "pixels"
        return stub_handle(model_id, kind=stub_kind, batch_size=batch_size)
    return _real_handle(model_id, batch_size, pooling)
