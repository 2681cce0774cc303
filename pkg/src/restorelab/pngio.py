"""PNG encode/decode boundary.

Images are RGBA 8-bit; masks are single-channel 8-bit with values 0/255.
Grayscale mask inputs are normalized by thresholding at >=128.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BinaryMask, ImageBuffer


def encode_image_png(image: ImageBuffer) -> bytes:
    im = Image.frombytes("RGBA", (image.width, image.height), image.pixels)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def decode_image_png(data: bytes) -> ImageBuffer:
    im = Image.open(io.BytesIO(data))
    im = im.convert("RGBA")
    arr = np.asarray(im, dtype=np.uint8)
    return ImageBuffer.from_array(arr)


def encode_mask_png(mask: BinaryMask) -> bytes:
    im = Image.frombytes("L", (mask.width, mask.height), mask.values)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> BinaryMask:
    im = Image.open(io.BytesIO(data)).convert("L")
    arr = np.asarray(im, dtype=np.uint8)
    return BinaryMask.from_array(arr >= 128)


def load_image(path: str | Path) -> ImageBuffer:
    return decode_image_png(Path(path).read_bytes())


def save_image(path: str | Path, image: ImageBuffer) -> None:
    Path(path).write_bytes(encode_image_png(image))


def load_mask(path: str | Path) -> BinaryMask:
    return decode_mask_png(Path(path).read_bytes())


def save_mask(path: str | Path, mask: BinaryMask) -> None:
    Path(path).write_bytes(encode_mask_png(mask))
