"""Embedding sets, the EMB1 binary file format, and the experiment manifest.

EMB1 layout (all integers little-endian):

    magic   4 bytes  ``EMB1``
    version u32      1
    N       u32      number of vectors
    d       u32      vector dimension
    mlen    u32      byte length of the metadata block
    meta    mlen bytes of UTF-8 JSON: {"model": str, "angle": int,
                                       "rotation_augmented": bool}
    data    N * d little-endian float32 values, row-major

A manifest is a JSON document ``{"entries": [...]}`` where each entry maps a
model name to its per-angle embedding files (see :class:`ManifestEntry`).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFileError,
    FormatError,
    IncompleteManifestError,
    ValidationError,
)

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

CONTROL_ANGLE = 0


@dataclass
class EmbeddingSet:
    """An N x d float32 matrix of latent vectors plus provenance metadata.

    Instances loaded from disk are validated and frozen (the array is marked
    read-only), so they are safe to share across threads.
    """

    vectors: np.ndarray
    model_name: str = "unknown"
    angle_degrees: int = 0
    rotation_augmented: bool = False

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValidationError(
                f"vectors must be a 2-D matrix, got shape {self.vectors.shape}"
            )
        self.angle_degrees = int(self.angle_degrees)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def validate(self) -> "EmbeddingSet":
        """Check all invariants, raising ValidationError on the first failure."""
        n, d = self.vectors.shape
        if n < 2:
            raise ValidationError(f"embedding set needs at least 2 rows, got {n}")
        if d < 1:
            raise ValidationError("embedding dimension must be at least 1")
        if not np.isfinite(self.vectors).all():
            raise ValidationError("embedding set contains non-finite values")
        # Cosine alignment divides by row norms, so zero rows are unusable.
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        if (norms == 0.0).any():
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValidationError(f"row {bad} has zero norm")
        if not 0 <= self.angle_degrees < 360:
            raise ValidationError(
                f"angle must lie in [0, 360), got {self.angle_degrees}"
            )
        return self

    def freeze(self) -> "EmbeddingSet":
        self.vectors.flags.writeable = False
        return self


def _metadata_bytes(s: EmbeddingSet) -> bytes:
    meta = {
        "model": s.model_name,
        "angle": s.angle_degrees,
        "rotation_augmented": bool(s.rotation_augmented),
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_embeddings(s: EmbeddingSet, path) -> None:
    """Write a validated embedding set to ``path`` in EMB1 format.

    Validation runs before the file is opened, so an invalid set leaves no
    partial file behind.
    """
    s.validate()
    meta = _metadata_bytes(s)
    n, d = s.vectors.shape
    payload = np.ascontiguousarray(s.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(EMB1_MAGIC, EMB1_VERSION, n, d, len(meta)))
        f.write(meta)
        f.write(payload)


def read_embeddings(path) -> EmbeddingSet:
    """Read and validate an EMB1 file, returning a frozen EmbeddingSet."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for an EMB1 header")
    magic, version, n, d, mlen = _HEADER.unpack_from(raw)
    if magic != EMB1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {EMB1_MAGIC!r}")
    if version != EMB1_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    meta_end = _HEADER.size + mlen
    if len(raw) < meta_end:
        raise CorruptFileError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(raw[_HEADER.size:meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: metadata is not valid JSON ({exc})") from exc
    for key, kind in (("model", str), ("angle", int), ("rotation_augmented", bool)):
        if not isinstance(meta.get(key), kind):
            raise FormatError(f"{path}: metadata field {key!r} missing or mistyped")
    expected = meta_end + n * d * 4
    if len(raw) < expected:
        rows = (len(raw) - meta_end) // (d * 4) if d else 0
        raise CorruptFileError(
            f"{path}: payload truncated, header declares {n} rows but only "
            f"{rows} are present"
        )
    if len(raw) > expected:
        raise CorruptFileError(f"{path}: {len(raw) - expected} trailing bytes")
    vectors = np.frombuffer(raw, dtype="<f4", count=n * d, offset=meta_end)
    s = EmbeddingSet(
        vectors=vectors.reshape(n, d).copy(),
        model_name=meta["model"],
        angle_degrees=meta["angle"],
        rotation_augmented=meta["rotation_augmented"],
    )
    s.validate()
    return s.freeze()


def synthesize_pair(
    n: int,
    dim: int,
    noise_sigma: float,
    seed: int,
    model_name: str = "synthetic",
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Generate a matched (control, perturbed) pair of embedding sets.

    The control set is standard normal per coordinate; the second set adds
    independent Normal(0, noise_sigma^2) noise to each coordinate.  The
    generator is PCG64 seeded with ``seed``, so the same arguments always
    reproduce the same pair bit for bit.
    """
    if n < 2:
        raise ValueError(f"need at least 2 vectors, got {n}")
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    base = rng.standard_normal((n, dim)).astype(np.float32)
    noise = rng.standard_normal((n, dim)).astype(np.float32) * np.float32(noise_sigma)
    control = EmbeddingSet(base, model_name=model_name, angle_degrees=0)
    shifted = EmbeddingSet(base + noise, model_name=model_name, angle_degrees=0)
    return control.freeze(), shifted.freeze()


@dataclass
class ManifestEntry:
    model_name: str
    rotation_augmented: bool
    embedding_paths: dict[int, Path] = field(default_factory=dict)

    def path_for(self, angle: int) -> Path:
        try:
            return self.embedding_paths[angle]
        except KeyError:
            raise IncompleteManifestError(
                f"model {self.model_name} missing angle {angle}"
            ) from None


@dataclass
class ModelManifest:
    entries: list[ManifestEntry]

    def entry(self, model_name: str) -> ManifestEntry:
        for e in self.entries:
            if e.model_name == model_name:
                return e
        raise KeyError(model_name)

    def validate(self, *, check_files: bool = True) -> "ModelManifest":
        names = [e.model_name for e in self.entries]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate model names in manifest: {dup}")
        for e in self.entries:
            if CONTROL_ANGLE not in e.embedding_paths:
                raise IncompleteManifestError(
                    f"model {e.model_name} missing angle {CONTROL_ANGLE} (control)"
                )
            for angle, p in e.embedding_paths.items():
                if not 0 <= angle < 360:
                    raise ValidationError(
                        f"model {e.model_name}: angle {angle} out of range"
                    )
                if check_files and not Path(p).is_file():
                    raise ValidationError(
                        f"model {e.model_name} angle {angle}: embedding file not found: {p}"
                    )
        return self


def load_manifest(path) -> ModelManifest:
    """Load and validate a manifest; relative file paths resolve against the
    manifest's own directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise FormatError(f"{path}: manifest must be an object with an 'entries' list")
    base = path.parent
    entries = []
    for i, raw in enumerate(doc["entries"]):
        try:
            paths = {
                int(angle): (base / p if not Path(p).is_absolute() else Path(p))
                for angle, p in raw["embedding_paths"].items()
            }
            entries.append(
                ManifestEntry(
                    model_name=str(raw["model_name"]),
                    rotation_augmented=bool(raw["rotation_augmented"]),
                    embedding_paths=paths,
                )
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"{path}: malformed manifest entry {i} ({exc})") from exc
    return ModelManifest(entries).validate()


def save_manifest(manifest: ModelManifest, path) -> None:
    """Write a manifest as JSON, storing paths relative to the manifest dir
    where possible."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: Path) -> str:
        p = Path(p)
        try:
            return p.resolve().relative_to(base).as_posix()
        except ValueError:
            return str(p)

    doc = {
        "entries": [
            {
                "model_name": e.model_name,
                "rotation_augmented": e.rotation_augmented,
                "embedding_paths": {
                    str(a): rel(p) for a, p in sorted(e.embedding_paths.items())
                },
            }
            for e in manifest.entries
        ]
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
