"""embed-adapter: export per-angle embedding files for the rotalign toolkit.

Loads a configured vision encoder (or a deterministic stub), applies the
rotation grid to extracted patches, runs batched inference, and writes one
EMB1 file per (model, angle) plus a manifest fragment.
"""

from .emb1 import write_embeddings_file
from .encoders import PRESETS, ModelHandle, load_model, stub_handle
from .errors import AdapterError
from .extract import AngleGrid, extract, load_patch_stack, parse_angle_grid
from .rotation import rotate_patch

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "AngleGrid",
    "ModelHandle",
    "PRESETS",
    "extract",
    "load_model",
    "load_patch_stack",
    "parse_angle_grid",
    "rotate_patch",
    "stub_handle",
    "write_embeddings_file",
]
