"""Patch extraction from RGB rasters and the patch rotation operator.

The pipeline mirrors a standard tissue-tiling workflow: convert to HSV and
threshold the saturation channel (Otsu by default), clean the mask with a
3x3 morphological open-then-close, pick the largest connected regions, and
tile their bounding boxes into fixed-size patches kept only when enough of
their area is foreground.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

DEFAULT_PATCH_SIZE = 256
DEFAULT_MIN_FOREGROUND = 0.75
DEFAULT_REGION_COUNT = 5
WHITE = (255, 255, 255)

# 8-connectivity for component labeling.
_CONNECTIVITY = np.ones((3, 3), dtype=bool)
_STRUCTURE = np.ones((3, 3), dtype=bool)

# A mask is an H x W boolean array, True where tissue/foreground.
ForegroundMask = np.ndarray


@dataclass
class Patch:
    """A small RGB crop plus its top-left origin in the source image."""

    pixels: np.ndarray  # (H, W, 3) uint8
    x: int = 0
    y: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"patch must be H x W x 3, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("patch must be nonempty")


@dataclass(frozen=True)
class RotationSpec:
    angle_degrees: int
    interpolation: str = "bilinear"
    fill: tuple[int, int, int] = WHITE

    def __post_init__(self):
        if not 0 <= self.angle_degrees < 360:
            raise ValueError(
                f"angle must lie in [0, 360), got {self.angle_degrees}"
            )
        if self.interpolation not in ("nearest", "bilinear"):
            raise ValueError(
                f"interpolation must be 'nearest' or 'bilinear', got {self.interpolation!r}"
            )
        if len(self.fill) != 3 or any(not 0 <= c <= 255 for c in self.fill):
            raise ValueError(f"fill must be an RGB triple in [0, 255], got {self.fill}")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates; (x, y) is the top-left corner."""

    x: int
    y: int
    width: int
    height: int
    area: int = 0  # pixel count of the component that produced the box


def _require_rgb(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 RGB image, got shape {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError("image is empty")
    return image.astype(np.uint8)


def saturation_channel(image) -> np.ndarray:
    """HSV saturation of an RGB image as float64 in [0, 1]."""
    rgb = _require_rgb(image).astype(np.float64) / 255.0
    mx = rgb.max(axis=2)
    mn = rgb.min(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        sat = np.where(mx > 0.0, (mx - mn) / np.where(mx > 0.0, mx, 1.0), 0.0)
    return sat


def otsu_threshold(values: np.ndarray) -> int | None:
    """Otsu's threshold over 256 bins of values scaled to [0, 255].

    Returns None when the histogram is single-class (no split exists).
    """
    levels = np.clip(np.rint(values * 255.0), 0, 255).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if np.count_nonzero(hist) < 2:
        return None
    omega = np.cumsum(hist) / total                 # class 0 weight for t
    mu = np.cumsum(hist * np.arange(256)) / total   # cumulative mean
    mu_total = mu[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma_b = (mu_total * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b[~np.isfinite(sigma_b)] = 0.0
    return int(np.argmax(sigma_b))


def segment_foreground(image, threshold: float | None = None) -> ForegroundMask:
    """Binary tissue mask from an RGB image.

    Thresholds the HSV saturation channel (Otsu unless a fixed ``threshold``
    in [0, 1] is given; foreground is the more-saturated side), then applies
    a 3x3 morphological open-then-close as noise reduction.  Degenerate
    single-class images come back all-foreground when their mean saturation
    is at least half of the range, else all-background.
    """
    sat = saturation_channel(image)
    if threshold is not None:
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
        mask = sat > threshold
    else:
        t = otsu_threshold(sat)
        if t is None:
            return np.full(sat.shape, bool(sat.mean() >= 0.5))
        mask = sat * 255.0 > t
    # Pad with edge replication so foreground touching the image border
    # survives the open/close (scipy treats outside pixels as background).
    padded = np.pad(mask, 1, mode="edge")
    padded = ndimage.binary_opening(padded, structure=_STRUCTURE)
    padded = ndimage.binary_closing(padded, structure=_STRUCTURE)
    return padded[1:-1, 1:-1]


def largest_regions(mask: ForegroundMask, count: int = DEFAULT_REGION_COUNT) -> list[BoundingBox]:
    """Bounding boxes of the ``count`` largest connected foreground regions.

    Area is the component pixel count; boxes come back largest first, with
    equal areas ordered by discovery (scan) order.  Fewer boxes are returned
    when the mask has fewer components; an empty mask yields an empty list.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    mask = np.asarray(mask, dtype=bool)
    labels, n_components = ndimage.label(mask, structure=_CONNECTIVITY)
    if n_components == 0:
        return []
    areas = np.bincount(labels.ravel())[1:]  # skip background label 0
    order = sorted(range(n_components), key=lambda i: (-areas[i], i))[:count]
    slices = ndimage.find_objects(labels)
    boxes = []
    for i in order:
        sl_y, sl_x = slices[i]
        boxes.append(
            BoundingBox(
                x=int(sl_x.start),
                y=int(sl_y.start),
                width=int(sl_x.stop - sl_x.start),
                height=int(sl_y.stop - sl_y.start),
                area=int(areas[i]),
            )
        )
    return boxes


def extract_patches(
    image,
    mask: ForegroundMask,
    boxes,
    patch_size: int = DEFAULT_PATCH_SIZE,
    min_foreground: float = DEFAULT_MIN_FOREGROUND,
) -> list[Patch]:
    """Tile each box on a non-overlapping grid and keep sufficiently-foreground tiles.

    The grid is anchored at each box's top-left corner with stride equal to
    ``patch_size``; only tiles fully inside both the box and the image are
    considered.  A tile is kept when its foreground pixel fraction is at
    least ``min_foreground``.
    """
    image = _require_rgb(image)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape} does not match image {image.shape[:2]}"
        )
    if patch_size < 1:
        raise ValueError(f"patch_size must be positive, got {patch_size}")
    if not 0.0 <= min_foreground <= 1.0:
        raise ValueError(f"min_foreground must lie in [0, 1], got {min_foreground}")

    img_h, img_w = mask.shape
    required = min_foreground * patch_size * patch_size
    out: list[Patch] = []
    for box in boxes:
        for row in range(box.height // patch_size):
            y = box.y + row * patch_size
            if y + patch_size > img_h:
                continue
            for col in range(box.width // patch_size):
                x = box.x + col * patch_size
                if x + patch_size > img_w:
                    continue
                tile_mask = mask[y:y + patch_size, x:x + patch_size]
                if int(tile_mask.sum()) >= required:
                    pixels = image[y:y + patch_size, x:x + patch_size].copy()
                    out.append(Patch(pixels=pixels, x=x, y=y))
    return out


def _rotate_interpolated(
    pixels: np.ndarray, angle: float, interpolation: str, fill
) -> np.ndarray:
    h, w = pixels.shape[:2]
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ys, xs = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    dx = xs - cx
    dy = ys - cy
    # Inverse map of a counterclockwise rotation in screen coordinates
    # (y axis points down).
    sx = cos_t * dx - sin_t * dy + cx
    sy = sin_t * dx + cos_t * dy + cy

    fill_arr = np.asarray(fill, dtype=np.float64)
    src = pixels.astype(np.float64)

    def gather(yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        vals = np.empty((h, w, 3), dtype=np.float64)
        vals[:] = fill_arr
        ok = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals[ok] = src[yy[ok], xx[ok]]
        return vals

    if interpolation == "nearest":
        out = gather(np.rint(sy).astype(np.int64), np.rint(sx).astype(np.int64))
    else:
        x0 = np.floor(sx).astype(np.int64)
        y0 = np.floor(sy).astype(np.int64)
        fx = (sx - x0)[..., None]
        fy = (sy - y0)[..., None]
        out = (
            gather(y0, x0) * (1.0 - fx) * (1.0 - fy)
            + gather(y0, x0 + 1) * fx * (1.0 - fy)
            + gather(y0 + 1, x0) * (1.0 - fx) * fy
            + gather(y0 + 1, x0 + 1) * fx * fy
        )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def rotate_pixels(pixels: np.ndarray, spec: RotationSpec) -> np.ndarray:
    """Rotate an RGB array counterclockwise about its centre, keeping its shape.

    Multiples of 90 degrees are exact index permutations (lossless) when the
    array is square; all other angles are resampled with the spec's
    interpolation, exposing corners filled with ``spec.fill``.
    """
    pixels = np.asarray(pixels, dtype=np.uint8)
    angle = spec.angle_degrees % 360
    if angle == 0:
        return pixels.copy()
    if angle % 90 == 0 and pixels.shape[0] == pixels.shape[1]:
        return np.ascontiguousarray(np.rot90(pixels, k=angle // 90))
    return _rotate_interpolated(pixels, float(angle), spec.interpolation, spec.fill)


def rotate_patch(patch: Patch, spec: RotationSpec) -> Patch:
    return Patch(pixels=rotate_pixels(patch.pixels, spec), x=patch.x, y=patch.y)


def load_image(path) -> np.ndarray:
    """Load a raster image as an H x W x 3 uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def patch_filename(source_stem: str, patch: Patch, angle: int = 0) -> str:
    return f"{source_stem}_x{patch.x}_y{patch.y}_rot{angle}.png"


@dataclass
class PatchIndex:
    """On-disk index of extracted patches, written next to the PNG files."""

    source: str
    patch_size: int
    min_foreground: float
    patches: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "source": self.source,
            "patch_size": self.patch_size,
            "min_foreground": self.min_foreground,
            "patches": self.patches,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_patches(
    patches: list[Patch],
    out_dir,
    source_stem: str,
    patch_size: int = DEFAULT_PATCH_SIZE,
    min_foreground: float = DEFAULT_MIN_FOREGROUND,
) -> Path:
    """Write patches as PNGs plus a JSON index; returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = PatchIndex(
        source=source_stem, patch_size=patch_size, min_foreground=min_foreground
    )
    for patch in patches:
        name = patch_filename(source_stem, patch)
        Image.fromarray(patch.pixels, mode="RGB").save(out_dir / name)
        index.patches.append({"file": name, "x": patch.x, "y": patch.y})
    index_path = out_dir / f"{source_stem}_patches.json"
    index_path.write_text(index.to_json(), encoding="utf-8")
    return index_path
