from __future__ import annotations

import base64
import io

import numpy as np
import pytest
from PIL import Image

from restorelab_sidecar.config import SidecarConfig
from restorelab_sidecar.service import create_app


class StubDetector:
    """Returns a configured detection list regardless of pixels."""

    def __init__(self, objects: list[dict]):
        self.objects = objects

    def detect(self, image: np.ndarray, min_confidence: float) -> list[dict]:
        return [dict(obj) for obj in self.objects]


class StubSegmenter:
    """Builds rectangular instance masks from configured specs."""

    def __init__(self, specs: list[tuple[str, float, tuple[int, int, int, int]]]):
        self.specs = specs

    def segment(self, image: np.ndarray, min_confidence: float) -> list[dict]:
        h, w = image.shape[:2]
        objects = []
        for class_label, confidence, (x, y, bw, bh) in self.specs:
            mask = np.zeros((h, w), dtype=bool)
            mask[y : y + bh, x : x + bw] = True
            objects.append({
                "class": class_label,
                "confidence": confidence,
                "mask": mask,
            })
        return objects

    def remove_background(self, image: np.ndarray) -> np.ndarray:
        return image[:, :, 3] >= 128


class StubInpainter:
    """Fills the masked region with a seed-derived solid color."""

    def inpaint(self, image, mask, prompt, seed, steps, guidance):
        out = image.copy()
        color = [(seed * 37 + 11) % 256, (seed * 57 + 23) % 256, (seed * 97 + 5) % 256, 255]
        out[mask] = color
        return out


def encode_image(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGBA").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_mask(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(b64: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGBA"))


def decode_mask(b64: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))).convert("L")) >= 128


def sample_image(width: int, height: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
    arr[:, :, 3] = 255
    return arr


@pytest.fixture
def stub_engines():
    return {
        "detect": StubDetector([
            {"class": "zebra", "confidence": 0.91, "bbox": [8, 8, 24, 20]},
            {"class": "dog", "confidence": 0.34, "bbox": [40, 30, 12, 12]},
        ]),
        "segment": StubSegmenter([
            ("zebra", 0.91, (8, 8, 24, 20)),
            ("horse", 0.77, (40, 30, 12, 12)),
        ]),
        "remove_background": StubSegmenter([]),
        "inpaint": StubInpainter(),
    }


@pytest.fixture
def app(stub_engines):
    return create_app(SidecarConfig(max_image_dim=256), stub_engines)


@pytest.fixture
def client(app):
    from fastapi.testclient import TestClient

    with TestClient(app, raise_server_exceptions=False) as client:
        yield client
