"""Shared fixtures: all embedding data is synthetic, no models involved."""

import numpy as np
import pytest

from rotalign import EmbeddingSet, ManifestEntry, write_embeddings


@pytest.fixture
def make_rng():
    def _make(seed=0):
        return np.random.Generator(np.random.PCG64(seed))
    return _make


@pytest.fixture
def make_set(make_rng):
    """Factory for random embedding sets with safely nonzero rows."""

    def _make(n=32, dim=8, seed=0, model="m", angle=0, augmented=False):
        vectors = make_rng(seed).standard_normal((n, dim)).astype(np.float32)
        return EmbeddingSet(
            vectors, model_name=model, angle_degrees=angle, rotation_augmented=augmented
        )

    return _make


@pytest.fixture
def write_entry(tmp_path):
    """Write per-angle EMB1 files for one model and return its manifest entry."""

    def _write(name, vectors_by_angle, augmented=False, subdir=None):
        base = tmp_path if subdir is None else tmp_path / subdir
        base.mkdir(parents=True, exist_ok=True)
        paths = {}
        for angle, vectors in vectors_by_angle.items():
            path = base / f"{name}_angle{angle}.emb"
            write_embeddings(
                EmbeddingSet(
                    vectors,
                    model_name=name,
                    angle_degrees=angle,
                    rotation_augmented=augmented,
                ),
                path,
            )
            paths[angle] = path
        return ManifestEntry(
            model_name=name, rotation_augmented=augmented, embedding_paths=paths
        )

    return _write
