"""TMA-spot image preparation and ordinal ISUP labels.

Images are ``uint8`` numpy arrays, ``(H, W)`` for grayscale and
``(H, W, 3)`` for RGB.  The spot pipeline is grayscale -> Otsu mask ->
moment ellipse -> centred square crop -> non-overlapping tiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import _kernels
from .errors import InvalidInputError

DEFAULT_CROP = 2048
DEFAULT_PATCH = 256
ISUP_CLASSES = 5


@dataclass(frozen=True)
class EllipseFit:
    center: tuple  # (x, y), x = column
    semi_axes: tuple  # (a, b), a >= b
    orientation: float  # radians, major axis vs +x, in (-pi/2, pi/2]

    def to_dict(self) -> dict:
        return {"center": list(self.center), "semi_axes": list(self.semi_axes), "orientation": self.orientation}


def _as_image(img, channels=None) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise InvalidInputError(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise InvalidInputError(f"unsupported image shape {img.shape}")
    if channels == 1 and img.ndim != 2:
        raise InvalidInputError("expected a single-channel image")
    if channels == 3 and img.ndim != 3:
        raise InvalidInputError("expected a 3-channel image")
    return img


def to_grayscale(img) -> np.ndarray:
    """ITU-R 601 luma ``0.299 R + 0.587 G + 0.114 B``, rounded half-up."""
    rgb = _as_image(img, channels=3).astype(np.float64)
    y = rgb @ np.array([0.299, 0.587, 0.114])
    return np.floor(y + 0.5).clip(0, 255).astype(np.uint8)


def otsu_threshold(gray):
    """Return ``(threshold, mask)``; ``mask`` is True where ``pixel <= threshold``.

    The threshold maximises the between-class variance of the split
    ``<= t`` / ``> t``; the lowest maximiser wins ties.
    """
    gray = _as_image(gray, channels=1)
    hist = np.bincount(gray.ravel(), minlength=256)
    if np.count_nonzero(hist) < 2:
        raise InvalidInputError("constant image: Otsu threshold undefined")
    scores = _kernels.otsu_scores(hist.astype(np.float64))
    t = int(np.argmax(scores))
    return t, gray <= t


def fit_ellipse(mask) -> EllipseFit:
    """Ellipse with the same centroid and second central moments as ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidInputError("mask must be 2-D")
    ys, xs = np.nonzero(mask)
    if xs.size < 5:
        raise InvalidInputError("need at least 5 foreground pixels to fit an ellipse")
    cx, cy = xs.mean(), ys.mean()
    dx, dy = xs - cx, ys - cy
    cov = np.array([[np.mean(dx * dx), np.mean(dx * dy)], [np.mean(dx * dy), np.mean(dy * dy)]])
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 0:
        raise InvalidInputError("degenerate foreground (collinear pixels)")
    major = evecs[:, 1]
    angle = math.atan2(major[1], major[0])
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    a, b = 2.0 * math.sqrt(evals[1]), 2.0 * math.sqrt(evals[0])
    return EllipseFit((float(cx), float(cy)), (a, b), float(angle))


def crop_origin(shape, center, side: int) -> tuple:
    """Top-left ``(x0, y0)`` of the crop window used by :func:`center_crop`."""
    h, w = shape[:2]
    side = int(side)
    if side < 1 or side > h or side > w:
        raise InvalidInputError(f"crop side {side} does not fit a {w}x{h} image")
    cx, cy = center
    x0 = int(math.floor(cx - side / 2.0 + 0.5))
    y0 = int(math.floor(cy - side / 2.0 + 0.5))
    return min(max(x0, 0), w - side), min(max(y0, 0), h - side)


def center_crop(img, center, side: int = DEFAULT_CROP) -> np.ndarray:
    """``side x side`` window around ``center`` shifted inside the image, never padded."""
    img = _as_image(img)
    x0, y0 = crop_origin(img.shape, center, side)
    return img[y0:y0 + side, x0:x0 + side].copy()


def tile(img, patch_side: int = DEFAULT_PATCH) -> list:
    """Row-major non-overlapping square patches."""
    img = _as_image(img)
    h, w = img.shape[:2]
    if patch_side < 1 or h % patch_side or w % patch_side:
        raise InvalidInputError(f"image {w}x{h} is not divisible into {patch_side}-pixel patches")
    return [
        img[r:r + patch_side, c:c + patch_side].copy()
        for r in range(0, h, patch_side)
        for c in range(0, w, patch_side)
    ]


def untile(patches, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`tile` for a ``rows x cols`` patch layout."""
    if len(patches) != rows * cols:
        raise InvalidInputError("patch count does not match the layout")
    return np.concatenate([np.concatenate(patches[r * cols:(r + 1) * cols], axis=1) for r in range(rows)], axis=0)


def dihedral(img, index: int) -> np.ndarray:
    """Element ``index`` (0-7) of the square's symmetry group: ``index % 4`` quarter
    turns, then a horizontal flip when ``index >= 4``."""
    img = np.asarray(img)
    if not 0 <= index < 8:
        raise InvalidInputError("dihedral index must be in 0..7")
    out = np.rot90(img, k=index % 4, axes=(0, 1))
    if index >= 4:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def augment(img, seed) -> np.ndarray:
    """Random lossless flip/rotation of a square image."""
    img = _as_image(img)
    if img.shape[0] != img.shape[1]:
        raise InvalidInputError("augmentation needs a square image")
    index = int(np.random.default_rng(seed).integers(8))
    return dihedral(img, index)


def resize_bilinear(img, size: int) -> np.ndarray:
    """Square bilinear resize with half-pixel centres (OpenCV ``INTER_LINEAR`` layout)."""
    img = _as_image(img)
    h, w = img.shape[:2]
    src = img.astype(np.float64)

    def axis_weights(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        i0 = np.floor(pos).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    y0, y1, fy = axis_weights(h, size)
    x0, x1, fx = axis_weights(w, size)
    if src.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)


def preprocess_spot(rgb, side: int = DEFAULT_CROP, patch: int = DEFAULT_PATCH):
    """Full spot pipeline; returns ``(crop, patches, threshold, EllipseFit)``."""
    img = _as_image(rgb)
    gray = to_grayscale(img) if img.ndim == 3 else img
    threshold, mask = otsu_threshold(gray)
    fit = fit_ellipse(mask)
    crop = center_crop(img, fit.center, side)
    return crop, tile(crop, patch), threshold, fit


def read_png(path) -> np.ndarray:
    """8-bit grayscale or RGB pixels; other modes are converted to RGB."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return np.asarray(im, dtype=np.uint8).copy()
    except (OSError, SyntaxError) as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from None


def write_png(path, img) -> None:
    img = _as_image(img)
    Image.fromarray(img).save(path, format="PNG")


# ---------------------------------------------------------------------------
# Ordinal ISUP labels
# ---------------------------------------------------------------------------


def isup_encode(cls: int) -> np.ndarray:
    """Cumulative code: position ``i`` is 1 when ``i < cls``."""
    if int(cls) != cls or not 0 <= cls <= ISUP_CLASSES:
        raise InvalidInputError(f"ISUP class must be an integer in 0..{ISUP_CLASSES}")
    return (np.arange(ISUP_CLASSES) < cls).astype(np.float64)


def isup_decode(output) -> int:
    o = np.asarray(output, dtype=np.float64).reshape(-1)
    if o.size != ISUP_CLASSES:
        raise InvalidInputError(f"expected {ISUP_CLASSES} outputs")
    return int(math.floor(min(max(o.sum(), 0.0), ISUP_CLASSES) + 0.5))


def ordinal_xent(output, label, epsilon: float = 1e-7) -> float:
    """Summed binary cross-entropy over the ordinal positions."""
    o = np.asarray(output, dtype=np.float64).reshape(-1)
    y = np.asarray(label, dtype=np.float64).reshape(-1)
    if o.shape != y.shape:
        raise InvalidInputError("output and label lengths differ")
    o = np.clip(o, epsilon, 1.0 - epsilon)
    return float(-np.sum(y * np.log(o) + (1.0 - y) * np.log(1.0 - o)))
