"""Rotation-sweep orchestration: angle grids, per-model evaluation, aggregation.

Each model's control (0 degree) embedding set is compared pairwise against
every rotated set on the grid; the control's neighbour index is computed once
and reused across angles.  Models and angles evaluate concurrently, but the
result table is assembled by (model, angle) key so output never depends on
scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import AggregationError, IncompleteManifestError, PairingError
from .metrics import cosine_distance_mean, knn_indices, mutual_knn
from .store import CONTROL_ANGLE, ManifestEntry, ModelManifest, read_embeddings

THREADS_ENV = "ROTALIGN_THREADS"
DEFAULT_K = 10


@dataclass(frozen=True)
class AngleGrid:
    """Ordered rotation angles; angle 0 is the control condition."""

    angles: tuple[int, ...]
    control_angle: int = CONTROL_ANGLE

    def __post_init__(self):
        if list(self.angles) != sorted(set(self.angles)):
            raise ValueError("angles must be strictly increasing")
        if any(not 0 <= a < 360 for a in self.angles):
            raise ValueError("angles must lie in [0, 360)")
        if self.control_angle not in self.angles:
            raise ValueError(f"grid must contain the control angle {self.control_angle}")

    @property
    def rotated(self) -> tuple[int, ...]:
        return tuple(a for a in self.angles if a != self.control_angle)


def build_grid(start: int = 0, end: int = 360, step: int = 15) -> AngleGrid:
    """Half-open grid [start, end) of rotation angles; defaults give 24 angles."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if end <= start:
        raise ValueError(f"end must exceed start, got [{start}, {end})")
    if (end - start) % step != 0:
        raise ValueError(f"step {step} does not divide the span {end - start} evenly")
    if end > 360:
        raise ValueError(f"angles must stay below 360, got end={end}")
    return AngleGrid(angles=tuple(range(start, end, step)))


@dataclass(frozen=True)
class AngleScore:
    model: str
    angle: int
    mknn: float
    cosine: float


@dataclass(frozen=True)
class ModelAggregate:
    model: str
    mean_mknn: float
    mean_cosine: float


@dataclass
class AlignmentTable:
    """Per-(model, angle) scores for every non-control comparison.

    ``k`` is None for tables re-read from CSV, which does not carry it.
    """

    k: int | None
    angles: tuple[int, ...]  # the non-control angles each model must cover
    rows: list[AngleScore] = field(default_factory=list)

    def rows_for(self, model: str) -> list[AngleScore]:
        return [r for r in self.rows if r.model == model]

    @property
    def models(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.model not in seen:
                seen.append(r.model)
        return seen


def worker_count(n_tasks: int, max_workers: int | None = None) -> int:
    cap = max_workers
    env = os.environ.get(THREADS_ENV)
    if cap is None and env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if cap is None:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def evaluate_model(
    entry: ManifestEntry,
    grid: AngleGrid,
    k: int = DEFAULT_K,
    max_workers: int | None = None,
) -> list[AngleScore]:
    """Score one model's rotated sets against its control set.

    Every non-control grid angle must have an embedding file; the control's
    k-NN index is computed once and shared across angles.
    """
    missing = [a for a in grid.rotated if a not in entry.embedding_paths]
    if missing:
        raise IncompleteManifestError(
            f"model {entry.model_name} missing angle {missing[0]}"
        )
    control = read_embeddings(entry.path_for(grid.control_angle))
    control_index = knn_indices(control, k)

    def score(angle: int) -> AngleScore:
        rotated = read_embeddings(entry.path_for(angle))
        if rotated.n != control.n:
            raise PairingError(
                f"model {entry.model_name} angle {angle}: {rotated.n} rows "
                f"but control has {control.n}"
            )
        return AngleScore(
            model=entry.model_name,
            angle=angle,
            mknn=mutual_knn(control, rotated, k, control_index=control_index),
            cosine=cosine_distance_mean(control, rotated),
        )

    workers = worker_count(len(grid.rotated), max_workers)
    if workers == 1:
        results = [score(a) for a in grid.rotated]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score, grid.rotated))
    return sorted(results, key=lambda r: r.angle)


def evaluate_manifest(
    manifest: ModelManifest,
    grid: AngleGrid,
    k: int = DEFAULT_K,
    max_workers: int | None = None,
) -> AlignmentTable:
    """Evaluate every manifest entry; rows are ordered (manifest order, angle)."""
    table = AlignmentTable(k=k, angles=grid.rotated)
    for entry in manifest.entries:
        table.rows.extend(evaluate_model(entry, grid, k, max_workers=max_workers))
    return table


def aggregate(table: AlignmentTable) -> list[ModelAggregate]:
    """Arithmetic per-model means over the table's non-control angles.

    Raises AggregationError when a model's rows do not cover exactly the
    angles the table was built for.
    """
    out = []
    expected = tuple(sorted(table.angles))
    for model in table.models:
        rows = sorted(table.rows_for(model), key=lambda r: r.angle)
        got = tuple(r.angle for r in rows)
        if got != expected:
            missing = sorted(set(expected) - set(got))
            extra = sorted(set(got) - set(expected))
            raise AggregationError(
                f"model {model} incomplete: missing angles {missing}, "
                f"unexpected {extra}"
            )
        n = len(rows)
        out.append(
            ModelAggregate(
                model=model,
                mean_mknn=sum(r.mknn for r in rows) / n,
                mean_cosine=sum(r.cosine for r in rows) / n,
            )
        )
    return out
