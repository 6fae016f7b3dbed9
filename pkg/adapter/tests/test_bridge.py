"""Bridge contract: adapter output must flow through the installed rotalign
toolkit using only its public surfaces (CLI, EMB1 files, manifest JSON).
"""

import csv
import json
import shutil
import subprocess

import numpy as np
import pytest
from PIL import Image

from embed_adapter import extract, load_model, parse_angle_grid

ROTALIGN = shutil.which("rotalign")

pytestmark = pytest.mark.skipif(
    ROTALIGN is None, reason="rotalign CLI not installed; bridge test needs it"
)


def run_rotalign(*argv):
    return subprocess.run(
        [ROTALIGN, *argv], capture_output=True, text=True, check=False
    )


def read_alignment(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_angle_zero_self_comparison_through_full_path(patch_dir, tmp_path):
    """Control compared against itself through the bridge: mknn 1, cosine 0."""
    emb = tmp_path / "emb"
    extract(load_model("stub-pixels"), patch_dir(count=4), parse_angle_grid("0:360:180"), emb)

    # point the rotated slot at the very same control file
    manifest = {
        "entries": [{
            "model_name": "stub-pixels",
            "rotation_augmented": False,
            "embedding_paths": {
                "0": "stub-pixels_angle0.emb",
                "180": "stub-pixels_angle0.emb",
            },
        }]
    }
    manifest_path = emb / "self_manifest.json"
    manifest_path.write_text(json.dumps(manifest))

    out = tmp_path / "results"
    proc = run_rotalign(
        "sweep", "--manifest", str(manifest_path),
        "--angles", "0:360:180", "--k", "2", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    rows = read_alignment(out / "alignment.csv")
    assert len(rows) == 1
    assert float(rows[0]["mknn"]) == 1.0
    assert float(rows[0]["cosine"]) == 0.0


def test_adapter_files_load_in_toolkit_for_three_angle_run(patch_dir, tmp_path):
    """A 3-patch, 3-angle stub run sweeps cleanly end to end."""
    emb = tmp_path / "emb"
    fragment = extract(
        load_model("stub-pixels"), patch_dir(count=3), parse_angle_grid("0:360:120"), emb
    )
    manifest_path = emb / "manifest.json"
    manifest_path.write_text(json.dumps({"entries": [fragment]}))

    out = tmp_path / "results"
    proc = run_rotalign(
        "sweep", "--manifest", str(manifest_path),
        "--angles", "0:360:120", "--k", "1", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    rows = read_alignment(out / "alignment.csv")
    assert [int(r["angle"]) for r in rows] == [120, 240]
    for row in rows:
        assert 0.0 <= float(row["mknn"]) <= 1.0
        assert 0.0 <= float(row["cosine"]) <= 2.0


def test_mean_color_stub_is_invariant_at_half_turn(tmp_path):
    """Mean colour of symmetric patches survives a 180-degree rotation, so the
    cosine column reads zero through the real toolkit."""
    directory = tmp_path / "patches"
    directory.mkdir()
    rng = np.random.default_rng(9)
    records = []
    for i in range(3):
        half = rng.integers(60, 256, size=(16, 32, 3), dtype=np.uint8)
        symmetric = np.concatenate([half, half[::-1, ::-1]], axis=0)
        name = f"sym_x{i}_y0_rot0.png"
        Image.fromarray(symmetric, mode="RGB").save(directory / name)
        records.append({"file": name, "x": i, "y": 0})
    (directory / "sym_patches.json").write_text(json.dumps({
        "source": "sym", "patch_size": 32, "min_foreground": 0.75,
        "patches": records,
    }))

    emb = tmp_path / "emb"
    fragment = extract(load_model("stub-mean"), directory, parse_angle_grid("0:360:180"), emb)
    manifest_path = emb / "manifest.json"
    manifest_path.write_text(json.dumps({"entries": [fragment]}))

    out = tmp_path / "results"
    proc = run_rotalign(
        "sweep", "--manifest", str(manifest_path),
        "--angles", "0:360:180", "--k", "1", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    rows = read_alignment(out / "alignment.csv")
    assert len(rows) == 1
    assert abs(float(rows[0]["cosine"])) < 1e-6
