"""Alignment metrics between paired embedding sets.

Two scores quantify how well a perturbed set Z' preserves the structure of
its control set Z when rows correspond by index:

* mutual k-NN: the mean fraction of shared neighbour indices between the
  k-nearest-neighbour set of row i computed inside Z and the one computed
  inside Z' (Euclidean metric, self excluded).  1.0 means every
  neighbourhood survived the perturbation, 0.0 means none did.
* mean cosine distance: the average of 1 - cos(z_i, z'_i) over all row
  pairs.  0.0 means all directions are preserved, 2.0 means all flipped.

Neighbour search is exact brute force; distance ties are broken by
ascending row index so results are reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PairingError, ValidationError
from .store import EmbeddingSet

# Rows per block when forming the pairwise distance matrix; bounds peak
# memory at ~8 * BLOCK * N bytes.
_BLOCK_ROWS = 512


@dataclass(frozen=True)
class NeighborIndex:
    """Per-row k-nearest-neighbour indices, nearest first.

    ``neighbors[i]`` holds k distinct row indices != i, ordered by ascending
    Euclidean distance with ties broken by ascending index.
    """

    k: int
    neighbors: np.ndarray  # shape (n, k), int64

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]


@dataclass(frozen=True)
class AlignmentScore:
    mknn: float
    cosine_distance: float
    k: int
    n: int

    def __post_init__(self):
        if not 0.0 <= self.mknn <= 1.0:
            raise ValidationError(f"mutual k-NN score out of range: {self.mknn}")
        if not 0.0 <= self.cosine_distance <= 2.0:
            raise ValidationError(
                f"cosine distance out of range: {self.cosine_distance}"
            )


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, EmbeddingSet):
        m = data.vectors
    else:
        m = np.asarray(data)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError(f"expected an N x d matrix, got shape {m.shape}")
    return m


def knn_indices(data, k: int) -> NeighborIndex:
    """Exact k nearest neighbours of every row within its own set.

    Self-matches are excluded.  Ranking uses squared Euclidean distance
    (monotone equivalent to the distance itself); ties are resolved toward
    the smaller row index via a stable sort.
    """
    m = _as_matrix(data)
    n = m.shape[0]
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k >= n:
        raise ValueError(f"k must be smaller than the number of rows ({n}), got {k}")

    sq_norms = np.einsum("ij,ij->i", m, m)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        block = m[start:stop]
        # ||x - y||^2 = ||x||^2 + ||y||^2 - 2 x.y, computed in float64
        d2 = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (block @ m.T)
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return NeighborIndex(k=k, neighbors=out)


def _check_index(index: NeighborIndex, n: int, k: int) -> NeighborIndex:
    if index.k != k:
        raise ValueError(f"cached index has k={index.k}, expected {k}")
    if index.n != n:
        raise PairingError(f"cached index covers {index.n} rows, expected {n}")
    return index


def mutual_knn(
    control,
    rotated,
    k: int,
    *,
    control_index: NeighborIndex | None = None,
) -> float:
    """Mean shared-neighbour fraction between two index-paired sets.

    Neighbourhoods are computed within each set separately, so the two sets
    may have different dimensions (a warning is emitted if they do).  Pass a
    precomputed ``control_index`` to reuse the control set's neighbours
    across many comparisons; the result is identical to recomputing it.
    """
    a = _as_matrix(control)
    b = _as_matrix(rotated)
    if a.shape[0] != b.shape[0]:
        raise PairingError(
            f"sets must pair row-by-row: {a.shape[0]} vs {b.shape[0]} rows"
        )
    n = a.shape[0]
    if a.shape[1] != b.shape[1]:
        warnings.warn(
            f"comparing sets of different dimension ({a.shape[1]} vs {b.shape[1]}); "
            "neighbourhoods are computed per set, so this is allowed but unusual",
            stacklevel=2,
        )
    nn_a = control_index if control_index is not None else knn_indices(a, k)
    _check_index(nn_a, n, k)
    nn_b = knn_indices(b, k)

    # Membership test via sorted rows + searchsorted; exact integer count.
    sa = np.sort(nn_a.neighbors, axis=1)
    sb = np.sort(nn_b.neighbors, axis=1)
    shared = 0
    for i in range(n):
        shared += int(np.intersect1d(sa[i], sb[i], assume_unique=True).size)
    score = shared / (n * k)
    assert 0.0 <= score <= 1.0
    return score


def cosine_distance_mean(control, rotated) -> float:
    """Mean of 1 - cos(z_i, z'_i) over index-corresponding row pairs.

    Accumulation is in float64; each cosine is clamped to [-1, 1] so
    rounding can never push the result outside [0, 2].
    """
    a = _as_matrix(control)
    b = _as_matrix(rotated)
    if a.shape[0] != b.shape[0]:
        raise PairingError(
            f"sets must pair row-by-row: {a.shape[0]} vs {b.shape[0]} rows"
        )
    if a.shape[1] != b.shape[1]:
        raise PairingError(
            f"cosine distance needs equal dimensions: {a.shape[1]} vs {b.shape[1]}"
        )
    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    for name, norms in (("control", norms_a), ("rotated", norms_b)):
        if (norms == 0.0).any():
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValidationError(f"{name} row {bad} has zero norm")
    cos = np.einsum("ij,ij->i", a, b) / (norms_a * norms_b)
    np.clip(cos, -1.0, 1.0, out=cos)
    value = float(np.mean(1.0 - cos))
    assert 0.0 <= value <= 2.0
    return value


def alignment_score(control, rotated, k: int, *, control_index=None) -> AlignmentScore:
    """Convenience wrapper computing both metrics for one pair."""
    a = _as_matrix(control)
    return AlignmentScore(
        mknn=mutual_knn(control, rotated, k, control_index=control_index),
        cosine_distance=cosine_distance_mean(control, rotated),
        k=k,
        n=a.shape[0],
    )
