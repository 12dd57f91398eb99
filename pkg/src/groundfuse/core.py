"""Embedding vectors, bounding-box geometry, image masking, and cosine similarity.

Everything downstream composes these primitives. All floating-point math is
double precision; vectors and images are immutable after construction.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import BoxOutOfBounds, DimensionMismatch, EmptyInput, ZeroVector

# Norm below this is treated as a zero vector (corrupt data, not a direction).
ZERO_NORM_THRESHOLD = 1e-12

# A similarity is a plain float in [-1, 1] (within float rounding).
Similarity = float

# Embeddings are 1-D float64 numpy arrays, validated and frozen by as_embedding().
EmbeddingVector = np.ndarray


def as_embedding(values) -> EmbeddingVector:
    """Copy `values` into a read-only 1-D float64 array, validating it.

    Raises ValueError on empty, non-1-D, or non-finite input.
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError("embedding must have dim >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"dim {a.shape[0]} != dim {b.shape[0]}")


def cosine_similarity(a, b) -> Similarity:
    """Normalized cosine similarity a.b / (|a||b|).

    Symmetric and invariant under positive scaling of either argument.
    Raises DimensionMismatch on unequal dims, ZeroVector on near-zero norms.
    """
    a = as_embedding(a)
    b = as_embedding(b)
    _check_same_dim(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < ZERO_NORM_THRESHOLD or nb < ZERO_NORM_THRESHOLD:
        raise ZeroVector(f"norms {na:.3e}, {nb:.3e} below {ZERO_NORM_THRESHOLD}")
    return float(np.dot(a, b) / (na * nb))


def l2_normalize(v) -> EmbeddingVector:
    """Return v / |v| as a fresh read-only vector."""
    v = as_embedding(v)
    n = float(np.linalg.norm(v))
    if n < ZERO_NORM_THRESHOLD:
        raise ZeroVector(f"norm {n:.3e} below {ZERO_NORM_THRESHOLD}")
    out = v / n
    out.setflags(write=False)
    return out


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned pixel rectangle: (x, y) top-left corner, w x h extent.

    Ordering is lexicographic on (x, y, w, h), used to break detection ties.
    """

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box needs positive extent, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got x={self.x} y={self.y}")

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @classmethod
    def clamped(cls, x: float, y: float, w: float, h: float,
                frame_w: int, frame_h: int) -> "BoundingBox":
        """Build a box from raw detector coordinates, clamped to the frame.

        Detectors emit out-of-frame and fractional coordinates; the clamped box
        covers every pixel the raw box touches inside the frame. Raises
        BoxOutOfBounds when nothing remains.
        """
        left = max(int(math.floor(x)), 0)
        top = max(int(math.floor(y)), 0)
        right = min(int(math.ceil(x + w)), frame_w)
        bottom = min(int(math.ceil(y + h)), frame_h)
        if right <= left or bottom <= top:
            raise BoxOutOfBounds(
                f"box ({x}, {y}, {w}, {h}) is empty after clamping to {frame_w}x{frame_h}")
        return cls(left, top, right - left, bottom - top)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


def union_box(boxes) -> BoundingBox:
    """Minimal axis-aligned box containing every input box."""
    boxes = list(boxes)
    if not boxes:
        raise EmptyInput("union_box needs at least one box")
    x = min(b.x for b in boxes)
    y = min(b.y for b in boxes)
    right = max(b.right for b in boxes)
    bottom = max(b.bottom for b in boxes)
    return BoundingBox(x, y, right - x, bottom - y)


@dataclass(frozen=True, eq=False)
class Image:
    """An RGB image: (height, width, 3) uint8 pixel grid, row-major.

    `id` is the lowercase hex SHA-256 of the raw pixel bytes, so identical
    pixel content always maps to the same identifier regardless of source
    file encoding.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (h, w, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @cached_property
    def id(self) -> str:
        return hashlib.sha256(self.pixels.tobytes()).hexdigest()

    def full_box(self) -> BoundingBox:
        return BoundingBox(0, 0, self.width, self.height)

    @classmethod
    def from_file(cls, path) -> "Image":
        """Decode a PNG or JPEG file into an Image."""
        from PIL import Image as PILImage

        with PILImage.open(Path(path)) as im:
            rgb = im.convert("RGB")
            return cls(np.asarray(rgb))

    def to_png_bytes(self) -> bytes:
        from io import BytesIO

        from PIL import Image as PILImage

        buf = BytesIO()
        PILImage.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


def _clamp_to_frame(box: BoundingBox, image: Image) -> tuple[int, int, int, int] | None:
    """Intersect a box with the image frame; None when disjoint."""
    left = min(box.x, image.width)
    top = min(box.y, image.height)
    right = min(box.right, image.width)
    bottom = min(box.bottom, image.height)
    if right <= left or bottom <= top:
        return None
    return left, top, right, bottom


def apply_mask(image: Image, box: BoundingBox) -> Image:
    """Black out every pixel outside `box`, keeping image dimensions.

    The box is clamped to the frame first; a box that misses the image
    entirely raises BoxOutOfBounds.
    """
    region = _clamp_to_frame(box, image)
    if region is None:
        raise BoxOutOfBounds(
            f"box {box.to_dict()} does not intersect {image.width}x{image.height} image")
    left, top, right, bottom = region
    out = np.zeros_like(image.pixels)
    out[top:bottom, left:right] = image.pixels[top:bottom, left:right]
    return Image(out)


def apply_multi_mask(image: Image, boxes) -> Image:
    """Keep pixels inside the union of `boxes`, black out the rest.

    Used to build the relation sub-image from the subject and object boxes.
    Raises BoxOutOfBounds when no box intersects the image.
    """
    boxes = list(boxes)
    regions = [r for r in (_clamp_to_frame(b, image) for b in boxes) if r is not None]
    if not regions:
        raise BoxOutOfBounds(
            f"none of {len(boxes)} boxes intersect {image.width}x{image.height} image")
    out = np.zeros_like(image.pixels)
    for left, top, right, bottom in regions:
        out[top:bottom, left:right] = image.pixels[top:bottom, left:right]
    return Image(out)
