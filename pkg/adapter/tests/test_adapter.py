import json
import struct

import numpy as np
import pytest

from embed_adapter import (
    AdapterError,
    extract,
    load_model,
    load_patch_stack,
    parse_angle_grid,
    rotate_patch,
    stub_handle,
    write_embeddings_file,
)
from embed_adapter.cli import main

HEADER = struct.Struct("<4sIIII")


def parse_emb1(path):
    raw = path.read_bytes()
    magic, version, n, d, mlen = HEADER.unpack_from(raw)
    assert magic == b"EMB1" and version == 1
    meta = json.loads(raw[HEADER.size:HEADER.size + mlen])
    vectors = np.frombuffer(raw, dtype="<f4", count=n * d, offset=HEADER.size + mlen)
    assert len(raw) == HEADER.size + mlen + n * d * 4
    return meta, vectors.reshape(n, d)


class TestEmb1Writer:
    def test_layout_and_payload(self, tmp_path):
        vectors = np.arange(6, dtype=np.float32).reshape(2, 3) + 1.0
        path = tmp_path / "x.emb"
        write_embeddings_file(path, vectors, model="stub", angle=30)
        meta, loaded = parse_emb1(path)
        assert meta == {"angle": 30, "model": "stub", "rotation_augmented": False}
        assert np.array_equal(loaded, vectors)

    def test_rejects_zero_norm_rows(self, tmp_path):
        vectors = np.zeros((2, 3), dtype=np.float32)
        vectors[0] = 1.0
        with pytest.raises(ValueError, match="zero norm"):
            write_embeddings_file(tmp_path / "z.emb", vectors, model="s", angle=0)

    def test_rejects_single_row(self, tmp_path):
        with pytest.raises(ValueError, match="2 rows"):
            write_embeddings_file(
                tmp_path / "o.emb", np.ones((1, 3), dtype=np.float32), model="s", angle=0
            )


class TestRotation:
    def test_quarter_turn_permutation(self):
        a, b, c, d = (1, 1, 1), (2, 2, 2), (3, 3, 3), (4, 4, 4)
        patch = np.array([[a, b], [c, d]], dtype=np.uint8)
        assert np.array_equal(
            rotate_patch(patch, 90), np.array([[b, d], [a, c]], dtype=np.uint8)
        )

    def test_four_quarter_turns_identity(self):
        rng = np.random.default_rng(1)
        patch = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        out = patch
        for _ in range(4):
            out = rotate_patch(out, 90)
        assert np.array_equal(out, patch)

    def test_half_turn_preserves_pixel_multiset(self):
        rng = np.random.default_rng(2)
        patch = rng.integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
        turned = rotate_patch(patch, 180)
        assert np.array_equal(
            np.sort(patch.reshape(-1, 3), axis=0), np.sort(turned.reshape(-1, 3), axis=0)
        )


class TestAngleGrid:
    def test_default_style_grid(self):
        assert parse_angle_grid("0:360:120").angles == (0, 120, 240)

    @pytest.mark.parametrize("bad", ["0:360", "0:360:7", "15:360:15", "0:400:40", "a:b:c"])
    def test_invalid_specs(self, bad):
        with pytest.raises(AdapterError):
            parse_angle_grid(bad)


class TestStubEncoders:
    def test_pixels_stub_dimension(self):
        handle = stub_handle("stub-pixels", kind="pixels")
        batch = np.full((2, 32, 32, 3), 100, dtype=np.uint8)
        out = handle.encode(batch)
        assert out.shape == (2, handle.dim) == (2, 192)

    def test_mean_stub_returns_mean_color(self):
        handle = stub_handle("stub-mean", kind="mean")
        batch = np.zeros((1, 4, 4, 3), dtype=np.uint8)
        batch[0, :, :, 0] = 255
        batch[0, :, :, 1] = 51
        out = handle.encode(batch)
        assert out.shape == (1, 3)
        assert out[0].tolist() == pytest.approx([1.0, 0.2, 0.0])

    def test_deterministic(self, patch_dir):
        stack, _ = load_patch_stack(patch_dir())
        handle = stub_handle("stub-pixels")
        assert np.array_equal(handle.encode(stack), handle.encode(stack))

    def test_batch_size_does_not_change_output(self, patch_dir):
        from embed_adapter.extract import _encode_stack

        stack, _ = load_patch_stack(patch_dir(count=5))
        one = _encode_stack(stub_handle("stub-pixels", batch_size=1), stack)
        big = _encode_stack(stub_handle("stub-pixels", batch_size=64), stack)
        assert np.array_equal(one, big)

    def test_unknown_real_model(self):
        with pytest.raises(AdapterError, match="model load"):
            load_model("not-a-model")

    def test_stub_flag_overrides_real_id(self):
        handle = load_model("virchow", stub=True)
        assert handle.model_id == "virchow"
        assert handle.dim == 192

    def test_bad_pooling(self):
        with pytest.raises(AdapterError, match="pooling"):
            load_model("stub-pixels", pooling="max")


class TestExtract:
    def test_three_patch_three_angle_run(self, patch_dir, tmp_path):
        out = tmp_path / "emb"
        grid = parse_angle_grid("0:360:120")
        fragment = extract(load_model("stub-pixels"), patch_dir(), grid, out)
        assert sorted(fragment["embedding_paths"]) == ["0", "120", "240"]
        for angle in (0, 120, 240):
            meta, vectors = parse_emb1(out / f"stub-pixels_angle{angle}.emb")
            assert meta["angle"] == angle
            assert meta["model"] == "stub-pixels"
            assert vectors.shape == (3, 192)
        saved = json.loads((out / "stub-pixels_fragment.json").read_text())
        assert saved == fragment

    def test_row_order_identical_across_angles(self, patch_dir, tmp_path):
        # mean colour is exactly invariant under half turns, so row i of the
        # 180-degree file must equal row i of the control file
        out = tmp_path / "emb"
        grid = parse_angle_grid("0:360:180")
        extract(load_model("stub-mean"), patch_dir(count=4), grid, out)
        _, control = parse_emb1(out / "stub-mean_angle0.emb")
        _, half = parse_emb1(out / "stub-mean_angle180.emb")
        assert np.allclose(control, half, atol=1e-6)
        assert not np.allclose(control, control[::-1], atol=1e-3)

    def test_missing_index_names_stage(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        with pytest.raises(AdapterError, match="patch index"):
            load_patch_stack(empty)

    def test_too_few_patches(self, patch_dir):
        with pytest.raises(AdapterError, match="at least 2"):
            load_patch_stack(patch_dir(count=1))

    def test_wrong_encoder_dim_is_inference_error(self, patch_dir, tmp_path):
        handle = stub_handle("stub-pixels")
        handle.dim = 64  # claim a dimension the encoder does not produce
        with pytest.raises(AdapterError, match="inference"):
            extract(handle, patch_dir(), parse_angle_grid("0:360:180"), tmp_path / "o")


class TestCli:
    def test_extract_success(self, patch_dir, tmp_path, capsys):
        out = tmp_path / "emb"
        code = main([
            "extract", "--model", "stub-pixels", "--patches", str(patch_dir()),
            "--angles", "0:360:120", "--out", str(out), "--batch", "2", "--stub",
        ])
        assert code == 0
        assert "3 embedding files" in capsys.readouterr().out
        assert (out / "stub-pixels_fragment.json").is_file()

    def test_missing_patches_is_data_error(self, tmp_path, capsys):
        code = main([
            "extract", "--model", "stub-pixels", "--patches", str(tmp_path / "nope"),
            "--out", str(tmp_path / "o"), "--stub",
        ])
        assert code == 3
        assert "patch index" in capsys.readouterr().err

    def test_real_model_without_weights_fails_with_stage(self, patch_dir, tmp_path, capsys):
        code = main([
            "extract", "--model", "uni", "--patches", str(patch_dir()),
            "--angles", "0:360:180", "--out", str(tmp_path / "o"),
        ])
        assert code == 3
        assert "model load" in capsys.readouterr().err

    def test_bad_batch(self, patch_dir, tmp_path, capsys):
        code = main([
            "extract", "--model", "stub-pixels", "--patches", str(patch_dir()),
            "--out", str(tmp_path / "o"), "--batch", "0", "--stub",
        ])
        assert code == 3
        assert "batch" in capsys.readouterr().err
