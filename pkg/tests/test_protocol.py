import math

import numpy as np
import pytest

from rotalign import (
    AggregationError,
    AlignmentTable,
    AngleGrid,
    AngleScore,
    IncompleteManifestError,
    ModelManifest,
    PairingError,
    aggregate,
    build_grid,
    cosine_distance_mean,
    evaluate_manifest,
    evaluate_model,
    mutual_knn,
    read_embeddings,
)
from rotalign.protocol import worker_count


class TestBuildGrid:
    def test_default_grid(self):
        grid = build_grid()
        assert len(grid.angles) == 24
        assert grid.angles[0] == 0
        assert grid.angles[-1] == 345
        assert grid.control_angle == 0
        assert len(grid.rotated) == 23

    def test_quarter_grid(self):
        assert build_grid(0, 360, 90).angles == (0, 90, 180, 270)

    def test_non_divisor_step(self):
        with pytest.raises(ValueError, match="divide"):
            build_grid(0, 360, 7)

    def test_non_positive_step(self):
        with pytest.raises(ValueError, match="positive"):
            build_grid(0, 360, 0)

    def test_end_beyond_360(self):
        with pytest.raises(ValueError, match="360"):
            build_grid(0, 375, 15)

    def test_end_not_after_start(self):
        with pytest.raises(ValueError, match="exceed"):
            build_grid(90, 90, 15)

    def test_grid_without_control_rejected(self):
        with pytest.raises(ValueError, match="control"):
            build_grid(15, 360, 15)

    def test_angle_grid_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            AngleGrid(angles=(0, 30, 15))

    def test_angle_grid_range(self):
        with pytest.raises(ValueError, match=r"\[0, 360\)"):
            AngleGrid(angles=(0, 400))


def _identity_entry(write_entry, make_rng, grid, name="ident", n=20, dim=6):
    vectors = make_rng(31).standard_normal((n, dim)).astype(np.float32)
    return write_entry(name, {a: vectors for a in grid.angles})


class TestEvaluateModel:
    def test_identity_model_scores_perfectly(self, write_entry, make_rng):
        grid = build_grid(0, 360, 45)
        entry = _identity_entry(write_entry, make_rng, grid)
        scores = evaluate_model(entry, grid, k=5)
        assert [s.angle for s in scores] == list(grid.rotated)
        for s in scores:
            assert s.mknn == 1.0
            assert abs(s.cosine) < 1e-12

    def test_missing_angle_names_model_and_angle(self, write_entry, make_rng):
        grid = build_grid()
        entry = _identity_entry(write_entry, make_rng, grid, name="modelX")
        del entry.embedding_paths[195]
        with pytest.raises(IncompleteManifestError, match="modelX missing angle 195"):
            evaluate_model(entry, grid, k=3)

    def test_row_count_mismatch(self, write_entry, make_rng):
        grid = build_grid(0, 360, 180)
        rng = make_rng(5)
        entry = write_entry(
            "bad",
            {
                0: rng.standard_normal((10, 4)).astype(np.float32),
                180: rng.standard_normal((11, 4)).astype(np.float32),
            },
        )
        with pytest.raises(PairingError, match="180"):
            evaluate_model(entry, grid, k=2)

    def test_matches_uncached_module_calls(self, write_entry, make_rng):
        grid = build_grid(0, 360, 90)
        rng = make_rng(8)
        base = rng.standard_normal((30, 5)).astype(np.float32)
        by_angle = {
            a: (base if a == 0 else base + rng.standard_normal((30, 5)).astype(np.float32) * 0.2)
            for a in grid.angles
        }
        entry = write_entry("m", by_angle)
        scores = evaluate_model(entry, grid, k=4)
        control = read_embeddings(entry.embedding_paths[0])
        for s in scores:
            rotated = read_embeddings(entry.embedding_paths[s.angle])
            assert s.mknn == mutual_knn(control, rotated, 4)
            assert s.cosine == cosine_distance_mean(control, rotated)

    def test_noise_growing_with_angle_degrades_mknn(self, write_entry, make_rng):
        grid = build_grid(0, 360, 90)
        rng = make_rng(13)
        base = rng.standard_normal((200, 16)).astype(np.float32)
        sigma_by_angle = {90: 0.01, 180: 0.5, 270: 5.0}
        by_angle = {0: base}
        for angle, sigma in sigma_by_angle.items():
            noise = rng.standard_normal(base.shape).astype(np.float32) * np.float32(sigma)
            by_angle[angle] = base + noise
        entry = write_entry("noisy", by_angle)
        scores = evaluate_model(entry, grid, k=10)
        mknns = [s.mknn for s in scores]
        assert mknns == sorted(mknns, reverse=True)

    def test_single_worker_matches_parallel(self, write_entry, make_rng):
        grid = build_grid(0, 360, 45)
        entry = _identity_entry(write_entry, make_rng, grid, name="par", n=40)
        serial = evaluate_model(entry, grid, k=4, max_workers=1)
        parallel = evaluate_model(entry, grid, k=4, max_workers=4)
        assert serial == parallel


class TestEvaluateManifest:
    def test_row_count_and_order(self, write_entry, make_rng):
        grid = build_grid(0, 360, 90)
        entries = [
            _identity_entry(write_entry, make_rng, grid, name=f"m{i}") for i in range(3)
        ]
        table = evaluate_manifest(ModelManifest(entries), grid, k=3)
        assert len(table.rows) == 3 * (len(grid.angles) - 1)
        assert [r.model for r in table.rows[:3]] == ["m0", "m0", "m0"]
        assert table.k == 3


class TestAggregate:
    def _table(self, rows, angles=(90, 180, 270)):
        return AlignmentTable(k=10, angles=angles, rows=rows)

    def test_constant_scores(self):
        rows = [AngleScore("m", a, 0.7, 0.2) for a in (90, 180, 270)]
        aggs = aggregate(self._table(rows))
        assert aggs[0].mean_mknn == pytest.approx(0.7)
        assert aggs[0].mean_cosine == pytest.approx(0.2)

    def test_mean_cross_checked_by_fsum(self):
        angles = tuple(range(15, 360, 15))
        cosines = [0.1] * 22 + [0.33]
        rows = [AngleScore("m", a, 0.5, c) for a, c in zip(angles, cosines)]
        aggs = aggregate(AlignmentTable(k=10, angles=angles, rows=rows))
        assert aggs[0].mean_cosine == pytest.approx(math.fsum(cosines) / 23, abs=1e-12)
        assert aggs[0].mean_cosine == pytest.approx((22 * 0.1 + 0.33) / 23, abs=1e-12)

    def test_incomplete_model_rejected(self):
        rows = [AngleScore("m", a, 0.7, 0.2) for a in (90, 180)]
        with pytest.raises(AggregationError, match="missing angles \\[270\\]"):
            aggregate(self._table(rows))

    def test_unexpected_angle_rejected(self):
        rows = [AngleScore("m", a, 0.7, 0.2) for a in (90, 180, 270, 315)]
        with pytest.raises(AggregationError, match="unexpected"):
            aggregate(self._table(rows))

    def test_means_within_min_max(self, make_rng):
        rng = make_rng(9)
        angles = tuple(range(15, 360, 15))
        rows = [
            AngleScore("m", a, float(rng.uniform(0, 1)), float(rng.uniform(0, 2)))
            for a in angles
        ]
        aggs = aggregate(AlignmentTable(k=10, angles=angles, rows=rows))
        mknns = [r.mknn for r in rows]
        cosines = [r.cosine for r in rows]
        assert min(mknns) <= aggs[0].mean_mknn <= max(mknns)
        assert min(cosines) <= aggs[0].mean_cosine <= max(cosines)

    def test_multiple_models_keep_first_seen_order(self):
        rows = [AngleScore(m, a, 0.5, 0.5) for m in ("b", "a") for a in (90, 180, 270)]
        aggs = aggregate(self._table(rows))
        assert [a.model for a in aggs] == ["b", "a"]


class TestWorkerCount:
    def test_env_variable_caps_workers(self, monkeypatch):
        monkeypatch.setenv("ROTALIGN_THREADS", "2")
        assert worker_count(10) == 2

    def test_explicit_cap_wins(self, monkeypatch):
        monkeypatch.setenv("ROTALIGN_THREADS", "8")
        assert worker_count(10, max_workers=3) == 3

    def test_task_count_bounds_workers(self, monkeypatch):
        monkeypatch.setenv("ROTALIGN_THREADS", "16")
        assert worker_count(2) == 2

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv("ROTALIGN_THREADS", "many")
        with pytest.raises(ValueError, match="ROTALIGN_THREADS"):
            worker_count(4)

    def test_at_least_one(self, monkeypatch):
        monkeypatch.setenv("ROTALIGN_THREADS", "0")
        assert worker_count(4) == 1
