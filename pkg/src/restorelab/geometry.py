"""Core raster types, bounding-box arithmetic, and binary-mask morphology.

Everything here is an immutable value; all operations are pure functions and
safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MORPH_KINDS = ("dilate", "erode", "open", "close")


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major RGBA raster, 8 bits per channel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        expected = self.width * self.height * 4
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel payload is {len(self.pixels)} bytes, expected {expected} "
                f"for {self.width}x{self.height} RGBA"
            )

    def to_array(self) -> np.ndarray:
        """Read-only (height, width, 4) uint8 view of the pixel data."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 4)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError(f"expected (h, w, 4) array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.tobytes())

    @classmethod
    def filled(cls, width: int, height: int, rgba: tuple[int, int, int, int]) -> "ImageBuffer":
        arr = np.empty((height, width, 4), dtype=np.uint8)
        arr[:, :] = rgba
        return cls.from_array(arr)


@dataclass(frozen=True)
class BinaryMask:
    """Row-major single-channel selection mask; every sample is 0 or 255."""

    width: int
    height: int
    values: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        expected = self.width * self.height
        if len(self.values) != expected:
            raise ValueError(f"mask payload is {len(self.values)} bytes, expected {expected}")
        arr = np.frombuffer(self.values, dtype=np.uint8)
        if not (((arr == 0) | (arr == 255)).all()):
            raise ValueError("mask samples must be exactly 0 or 255")

    def to_array(self) -> np.ndarray:
        """Read-only (height, width) uint8 view."""
        return np.frombuffer(self.values, dtype=np.uint8).reshape(self.height, self.width)

    def to_bool(self) -> np.ndarray:
        return self.to_array() != 0

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        """Build from a (h, w) array; nonzero samples become 255."""
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) array, got shape {arr.shape}")
        out = np.where(arr != 0, 255, 0).astype(np.uint8)
        return cls(width=out.shape[1], height=out.shape[0], values=np.ascontiguousarray(out).tobytes())

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, values=bytes(width * height))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, values=b"\xff" * (width * height))

    def count(self) -> int:
        """Number of set pixels."""
        return int((self.to_array() != 0).sum())


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box anchored at the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"bbox origin must be >= 0, got ({self.x}, {self.y})")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"bbox size must be >= 1, got {self.w}x{self.h}")

    def area(self) -> int:
        return self.w * self.h


def pad_bbox(box: BBox, pad: int, canvas: tuple[int, int]) -> BBox:
    """Extend every side of `box` by `pad` pixels, clamped to the canvas."""
    if pad < 0:
        raise ValueError("pad must be >= 0")
    cw, ch = canvas
    x0 = max(box.x - pad, 0)
    y0 = max(box.y - pad, 0)
    x1 = min(box.x + box.w + pad, cw)
    y1 = min(box.y + box.h + pad, ch)
    return BBox(x=x0, y=y0, w=x1 - x0, h=y1 - y0)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    ix0 = max(a.x, b.x)
    iy0 = max(a.y, b.y)
    ix1 = min(a.x + a.w, b.x + b.w)
    iy1 = min(a.y + a.h, b.y + b.h)
    iw = ix1 - ix0
    ih = iy1 - iy0
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area() + b.area() - inter
    return inter / union


def _dilate_bool(a: np.ndarray, radius: int) -> np.ndarray:
    # Windowed OR over the (2r+1)^2 square; out-of-bounds neighbors count as 0.
    padded = np.pad(a, radius, mode="constant", constant_values=False)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return windows.any(axis=(2, 3))


def _erode_bool(a: np.ndarray, radius: int) -> np.ndarray:
    padded = np.pad(a, radius, mode="constant", constant_values=False)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return windows.all(axis=(2, 3))


def morph(mask: BinaryMask, kind: str, radius: int) -> BinaryMask:
    """Binary morphology with a (2r+1)x(2r+1) square structuring element.

    `open` is erode-then-dilate, `close` is dilate-then-erode. Pixels outside
    the mask bounds are treated as 0.
    """
    if radius < 1:
        raise ValueError("morph radius must be >= 1")
    if kind not in MORPH_KINDS:
        raise ValueError(f"unknown morph kind {kind!r}, expected one of {MORPH_KINDS}")
    a = mask.to_bool()
    if kind == "dilate":
        out = _dilate_bool(a, radius)
    elif kind == "erode":
        out = _erode_bool(a, radius)
    elif kind == "open":
        out = _dilate_bool(_erode_bool(a, radius), radius)
    else:
        out = _erode_bool(_dilate_bool(a, radius), radius)
    return BinaryMask.from_array(out)


def restoration_region(
    instance_mask: BinaryMask,
    damage_mask: BinaryMask | None,
    dilation_radius: int,
) -> BinaryMask:
    """Region to hand to the inpainter for one object.

    With a damage annotation the region is (instance AND damage); without one
    the whole instance is restored. Either way the result is dilated by
    `dilation_radius` (0 means no dilation).
    """
    if dilation_radius < 0:
        raise ValueError("dilation_radius must be >= 0")
    if damage_mask is not None:
        if (damage_mask.width, damage_mask.height) != (instance_mask.width, instance_mask.height):
            raise ValueError(
                f"damage mask is {damage_mask.width}x{damage_mask.height}, "
                f"instance mask is {instance_mask.width}x{instance_mask.height}"
            )
        region = instance_mask.to_bool() & damage_mask.to_bool()
    else:
        region = instance_mask.to_bool()
    if dilation_radius >= 1:
        region = _dilate_bool(region, dilation_radius)
    return BinaryMask.from_array(region)


def mask_to_alpha(crop: ImageBuffer, mask: BinaryMask) -> ImageBuffer:
    """Copy RGB from `crop` and take the alpha channel from `mask`."""
    if (mask.width, mask.height) != (crop.width, crop.height):
        raise ValueError(
            f"mask is {mask.width}x{mask.height}, crop is {crop.width}x{crop.height}"
        )
    arr = crop.to_array().copy()
    arr[:, :, 3] = mask.to_array()
    return ImageBuffer.from_array(arr)


def crop_image(image: ImageBuffer, box: BBox) -> ImageBuffer:
    """Extract the sub-image covered by `box` (must lie within the image)."""
    if box.x + box.w > image.width or box.y + box.h > image.height:
        raise ValueError(f"bbox {box} exceeds image bounds {image.width}x{image.height}")
    arr = image.to_array()[box.y : box.y + box.h, box.x : box.x + box.w]
    return ImageBuffer.from_array(arr)


def crop_mask(mask: BinaryMask, box: BBox) -> BinaryMask:
    if box.x + box.w > mask.width or box.y + box.h > mask.height:
        raise ValueError(f"bbox {box} exceeds mask bounds {mask.width}x{mask.height}")
    arr = mask.to_array()[box.y : box.y + box.h, box.x : box.x + box.w]
    return BinaryMask.from_array(arr)


def tight_bbox(mask: BinaryMask) -> BBox | None:
    """Smallest box covering all set pixels, or None for an empty mask."""
    a = mask.to_bool()
    rows = np.flatnonzero(a.any(axis=1))
    cols = np.flatnonzero(a.any(axis=0))
    if rows.size == 0:
        return None
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1)
