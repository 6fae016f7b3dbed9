"""rotalign: rotational-invariance analysis for learned image representations.

The toolkit extracts patches from RGB images, sweeps them through a rotation
grid, and quantifies how well an encoder's embeddings survive rotation using
two alignment metrics (mutual k-nearest neighbours and mean cosine distance),
with a two-sample t-test comparing model groups and CSV/JSON/SVG reporting.
"""

from .errors import (
    AggregationError,
    CorruptFileError,
    DegenerateInputError,
    FormatError,
    GroupingError,
    IncompleteManifestError,
    PairingError,
    RotalignError,
    ValidationError,
)
from .metrics import (
    AlignmentScore,
    NeighborIndex,
    alignment_score,
    cosine_distance_mean,
    knn_indices,
    mutual_knn,
)
from .patches import (
    BoundingBox,
    Patch,
    RotationSpec,
    extract_patches,
    largest_regions,
    load_image,
    rotate_patch,
    rotate_pixels,
    save_patches,
    segment_foreground,
)
from .protocol import (
    AlignmentTable,
    AngleGrid,
    AngleScore,
    ModelAggregate,
    aggregate,
    build_grid,
    evaluate_manifest,
    evaluate_model,
)
from .stats import (
    TTestResult,
    regularized_incomplete_beta,
    split_groups,
    t_sf,
    two_sample_ttest,
)
from .store import (
    EmbeddingSet,
    ManifestEntry,
    ModelManifest,
    load_manifest,
    read_embeddings,
    save_manifest,
    synthesize_pair,
    write_embeddings,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "AlignmentScore",
    "AlignmentTable",
    "AngleGrid",
    "AngleScore",
    "BoundingBox",
    "CorruptFileError",
    "DegenerateInputError",
    "EmbeddingSet",
    "FormatError",
    "GroupingError",
    "IncompleteManifestError",
    "ManifestEntry",
    "ModelAggregate",
    "ModelManifest",
    "NeighborIndex",
    "Patch",
    "PairingError",
    "RotalignError",
    "RotationSpec",
    "TTestResult",
    "ValidationError",
    "aggregate",
    "alignment_score",
    "build_grid",
    "cosine_distance_mean",
    "evaluate_manifest",
    "evaluate_model",
    "extract_patches",
    "knn_indices",
    "largest_regions",
    "load_image",
    "load_manifest",
    "mutual_knn",
    "read_embeddings",
    "regularized_incomplete_beta",
    "rotate_patch",
    "rotate_pixels",
    "save_manifest",
    "save_patches",
    "segment_foreground",
    "split_groups",
    "synthesize_pair",
    "t_sf",
    "two_sample_ttest",
    "write_embeddings",
]
