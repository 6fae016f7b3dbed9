"""Patch rotation with the same convention the rotalign patch extractor uses:
counterclockwise about the centre, output shape preserved, quarter turns as
exact index permutations, other angles bilinear-resampled with corner fill.
"""

import math

import numpy as np

WHITE = (255, 255, 255)


def rotate_patch(pixels: np.ndarray, angle: int, fill=WHITE) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.uint8)
    angle = angle % 360
    if angle == 0:
        return pixels.copy()
    if angle % 90 == 0 and pixels.shape[0] == pixels.shape[1]:
        return np.ascontiguousarray(np.rot90(pixels, k=angle // 90))
    return _bilinear_rotate(pixels, float(angle), fill)


def _bilinear_rotate(pixels: np.ndarray, angle: float, fill) -> np.ndarray:
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
    sx = cos_t * dx - sin_t * dy + cx
    sy = sin_t * dx + cos_t * dy + cy

    fill_arr = np.asarray(fill, dtype=np.float64)
    src = pixels.astype(np.float64)

    def gather(yy, xx):
        vals = np.empty((h, w, 3), dtype=np.float64)
        vals[:] = fill_arr
        ok = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals[ok] = src[yy[ok], xx[ok]]
        return vals

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
