"""Fixtures: hand-built patch directories matching the rotalign index schema."""

import json

import numpy as np
import pytest
from PIL import Image


def _patch_image(seed, size=32):
    rng = np.random.default_rng(seed)
    # bright, colourful content so no stub embedding collapses to zero norm
    return rng.integers(40, 256, size=(size, size, 3), dtype=np.uint8)


@pytest.fixture
def patch_dir(tmp_path):
    """Three distinct 32x32 patches plus their JSON index."""

    def _build(count=3, size=32, stem="slide"):
        directory = tmp_path / "patches"
        directory.mkdir(exist_ok=True)
        records = []
        for i in range(count):
            name = f"{stem}_x{i * size}_y0_rot0.png"
            Image.fromarray(_patch_image(100 + i, size), mode="RGB").save(directory / name)
            records.append({"file": name, "x": i * size, "y": 0})
        index = {
            "source": stem,
            "patch_size": size,
            "min_foreground": 0.75,
            "patches": records,
        }
        (directory / f"{stem}_patches.json").write_text(json.dumps(index, indent=2))
        return directory

    return _build
