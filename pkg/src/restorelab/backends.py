"""Pluggable model boundary: role contracts, the deterministic fixture
backend used for offline runs, and the HTTP adapter speaking the sidecar
wire protocol.
"""
from __future__ import annotations

import base64
import hashlib
import json
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from .errors import BackendError, BackendTimeoutError, ProtocolError
from .geometry import BBox, BinaryMask, ImageBuffer, tight_bbox
from .pngio import decode_image_png, decode_mask_png, encode_image_png, encode_mask_png, load_mask

ROLES = ("detector", "segmenter", "background_remover", "inpainter")
BACKEND_KINDS = ("fixture", "http")

DEFAULT_TIMEOUT = 120.0
FILL_ITERATIONS = 32


@dataclass(frozen=True)
class DetectedObject:
    class_label: str
    confidence: float
    bbox: BBox
    mask: BinaryMask | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class BackendSpec:
    """Where a role's model lives: a fixture directory or an HTTP base URL."""

    role: str
    kind: str
    locator: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown backend role {self.role!r}")
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not self.locator:
            raise ValueError("backend locator must be non-empty")

    @property
    def backend_id(self) -> str:
        digest = hashlib.sha256(self.locator.encode("utf-8")).hexdigest()[:12]
        return f"{self.role}:{self.kind}:{digest}"


class Detector(Protocol):
    def detect(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]: ...


class Segmenter(Protocol):
    def segment(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]: ...


class BackgroundRemover(Protocol):
    def remove_background(self, crop: ImageBuffer, *, object_id: int | None = None) -> BinaryMask: ...


class Inpainter(Protocol):
    def inpaint(
        self,
        image: ImageBuffer,
        mask: BinaryMask,
        prompt: str,
        seed: int,
        steps: int,
        guidance: float,
    ) -> ImageBuffer: ...


def sort_detections(objects: list[DetectedObject]) -> list[DetectedObject]:
    """Contract order: confidence descending, ties by bbox (y, x)."""
    return sorted(objects, key=lambda o: (-o.confidence, o.bbox.y, o.bbox.x))


def diffusion_fill(image: ImageBuffer, mask: BinaryMask, iterations: int = FILL_ITERATIONS) -> ImageBuffer:
    """Deterministic neighbor-average fill of the masked region.

    Masked pixels start at the mean color of the mask's 1-pixel outer ring,
    then `iterations` Jacobi passes average each masked pixel's 4-neighbors.
    Unmasked pixels are returned byte-identical.
    """
    if (mask.width, mask.height) != (image.width, image.height):
        raise ValueError(
            f"mask is {mask.width}x{mask.height}, image is {image.width}x{image.height}"
        )
    hole = mask.to_bool()
    if not hole.any():
        return image

    src = image.to_array().astype(np.float64)
    ring = _dilate1(hole) & ~hole
    if ring.any():
        seed_color = src[ring].mean(axis=0)
    else:
        # Mask covers the whole image: nothing to anchor on, start mid-gray.
        seed_color = np.array([128.0, 128.0, 128.0, 255.0])

    work = src.copy()
    work[hole] = seed_color
    h, w = hole.shape
    counts = np.full((h, w), 4.0)
    counts[0, :] -= 1
    counts[-1, :] -= 1
    counts[:, 0] -= 1
    counts[:, -1] -= 1
    counts = np.maximum(counts, 1.0)  # 1x1 image has no neighbors; keep it stable
    for _ in range(iterations):
        padded = np.pad(work, ((1, 1), (1, 1), (0, 0)), mode="constant")
        neighbor_sum = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        )
        avg = neighbor_sum / counts[:, :, None]
        if h == 1 and w == 1:
            avg = work
        work[hole] = avg[hole]

    out = image.to_array().copy()
    out[hole] = np.clip(np.rint(work[hole]), 0, 255).astype(np.uint8)
    return ImageBuffer.from_array(out)


def _dilate1(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out[1:, :] |= a[:-1, :]
    out[:-1, :] |= a[1:, :]
    out[:, 1:] |= a[:, :-1]
    out[:, :-1] |= a[:, 1:]
    # square structuring element: include diagonals
    out[1:, 1:] |= a[:-1, :-1]
    out[1:, :-1] |= a[:-1, 1:]
    out[:-1, 1:] |= a[1:, :-1]
    out[:-1, :-1] |= a[1:, 1:]
    return out


# ---------------------------------------------------------------------------
# fixture backend


def load_fixture_annotations(directory: str | Path, image_name: str) -> dict[str, Any]:
    """Load and validate `<stem>.fixtures.json` for an image in `directory`."""
    directory = Path(directory)
    stem = Path(image_name).stem
    path = directory / f"{stem}.fixtures.json"
    if not path.exists():
        raise FileNotFoundError(f"fixture annotations not found: {path}")
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"fixture file {path} is not valid JSON: {exc}") from exc
    _validate_fixture_record(record, path)
    return record


def _validate_fixture_record(record: Any, origin: object) -> None:
    if not isinstance(record, dict):
        raise ProtocolError(f"fixture record in {origin} must be an object")
    known = {"objects", "background_masks", "variants"}
    unknown = set(record) - known
    if unknown:
        raise ProtocolError(f"fixture record in {origin} has unknown keys: {sorted(unknown)}")
    object_lists = [record.get("objects", [])]
    variants = record.get("variants", {})
    if not isinstance(variants, dict):
        raise ProtocolError(f"fixture 'variants' in {origin} must be an object")
    for objs in variants.values():
        object_lists.append(objs)
    for objs in object_lists:
        if not isinstance(objs, list):
            raise ProtocolError(f"fixture 'objects' in {origin} must be a list")
        for obj in objs:
            _validate_wire_object(obj, origin)
    masks = record.get("background_masks", {})
    if not isinstance(masks, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in masks.items()
    ):
        raise ProtocolError(f"fixture 'background_masks' in {origin} must map ids to file names")


def _validate_wire_object(obj: Any, origin: object) -> None:
    if not isinstance(obj, dict):
        raise ProtocolError(f"detection object in {origin} must be a JSON object")
    for key in ("class", "confidence", "bbox"):
        if key not in obj:
            raise ProtocolError(f"detection object in {origin} is missing {key!r}")
    if not isinstance(obj["class"], str):
        raise ProtocolError(f"detection 'class' in {origin} must be a string")
    conf = obj["confidence"]
    if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not 0.0 <= conf <= 1.0:
        raise ProtocolError(f"detection confidence {conf!r} in {origin} is outside [0,1]")
    bbox = obj["bbox"]
    if (
        not isinstance(bbox, list)
        or len(bbox) != 4
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in bbox)
    ):
        raise ProtocolError(f"detection bbox {bbox!r} in {origin} must be [x, y, w, h] integers")
    if bbox[0] < 0 or bbox[1] < 0 or bbox[2] < 1 or bbox[3] < 1:
        raise ProtocolError(f"detection bbox {bbox!r} in {origin} is degenerate")
    if "mask_png_b64" in obj and not isinstance(obj["mask_png_b64"], str):
        raise ProtocolError(f"detection mask in {origin} must be base64 text")


def _wire_object_to_detection(obj: dict[str, Any], *, with_mask: bool, origin: object) -> DetectedObject:
    mask = None
    if with_mask:
        b64 = obj.get("mask_png_b64")
        if not b64:
            raise ProtocolError(f"segmentation object in {origin} is missing mask_png_b64")
        try:
            mask = decode_mask_png(base64.b64decode(b64))
        except Exception as exc:
            raise ProtocolError(f"segmentation mask in {origin} is not a decodable PNG: {exc}") from exc
    x, y, w, h = obj["bbox"]
    return DetectedObject(
        class_label=obj["class"],
        confidence=float(obj["confidence"]),
        bbox=BBox(x=x, y=y, w=w, h=h),
        mask=mask,
    )


def _check_segment_invariants(det: DetectedObject, image: ImageBuffer, origin: object) -> None:
    assert det.mask is not None
    if (det.mask.width, det.mask.height) != (image.width, image.height):
        raise ProtocolError(
            f"segmentation mask from {origin} is {det.mask.width}x{det.mask.height}, "
            f"image is {image.width}x{image.height}"
        )
    tight = tight_bbox(det.mask)
    if tight != det.bbox:
        raise ProtocolError(
            f"segmentation bbox {det.bbox} from {origin} does not match the mask's "
            f"tight bounds {tight}"
        )


class FixtureBackend:
    """File-driven stand-in for every backend role.

    Annotations are read from `<image_stem>.fixtures.json` next to the image.
    The inpainter role needs no annotations and works for any image. `variant`
    selects an alternative scripted detection set (used by the evaluation
    harness to supply per-variant scores); it falls back to the default
    `objects` list when the variant is absent.
    """

    def __init__(self, directory: str | Path, image_name: str | None = None, variant: str = "original"):
        self.directory = Path(directory)
        self.image_name = image_name
        self.variant = variant

    def _record(self) -> dict[str, Any]:
        if self.image_name is None:
            raise ProtocolError("fixture backend was constructed without an image name")
        return load_fixture_annotations(self.directory, self.image_name)

    def _objects(self) -> list[dict[str, Any]]:
        record = self._record()
        variants = record.get("variants", {})
        if self.variant in variants:
            return variants[self.variant]
        return record.get("objects", [])

    def detect(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]:
        dets = [
            _wire_object_to_detection(o, with_mask=False, origin=self.directory)
            for o in self._objects()
        ]
        return sort_detections([d for d in dets if d.confidence >= min_confidence])

    def segment(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]:
        dets = [
            _wire_object_to_detection(o, with_mask=True, origin=self.directory)
            for o in self._objects()
        ]
        for det in dets:
            _check_segment_invariants(det, image, self.directory)
        return sort_detections([d for d in dets if d.confidence >= min_confidence])

    def remove_background(self, crop: ImageBuffer, *, object_id: int | None = None) -> BinaryMask:
        masks = self._record().get("background_masks", {})
        if not masks:
            raise ProtocolError(f"fixture for {self.image_name} has no background_masks")
        if object_id is not None:
            key = str(object_id)
            if key not in masks:
                raise ProtocolError(f"fixture for {self.image_name} has no background mask for object {key}")
        elif len(masks) == 1:
            key = next(iter(masks))
        else:
            raise ProtocolError(
                f"fixture for {self.image_name} has {len(masks)} background masks; "
                "an object id is required to pick one"
            )
        mask = load_mask(self.directory / masks[key])
        if (mask.width, mask.height) != (crop.width, crop.height):
            raise ProtocolError(
                f"fixture background mask {masks[key]} is {mask.width}x{mask.height}, "
                f"crop is {crop.width}x{crop.height}"
            )
        return mask

    def inpaint(
        self,
        image: ImageBuffer,
        mask: BinaryMask,
        prompt: str,
        seed: int,
        steps: int,
        guidance: float,
    ) -> ImageBuffer:
        # prompt/seed/steps/guidance are accepted for manifest uniformity but
        # do not influence the deterministic fill.
        return diffusion_fill(image, mask)


# ---------------------------------------------------------------------------
# HTTP adapter


class HttpBackend:
    """Client for the sidecar wire protocol (all bodies UTF-8 JSON)."""

    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _post(self, endpoint: str, body: dict[str, Any]) -> dict[str, Any]:
        url = f"{self.base_url}{endpoint}"
        data = json.dumps(body).encode("utf-8")
        req = urllib.request.Request(
            url, data=data, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except socket.timeout as exc:
            raise BackendTimeoutError(f"{url} did not answer within {self.timeout}s") from exc
        except urllib.error.HTTPError as exc:
            detail = ""
            try:
                detail = json.loads(exc.read().decode("utf-8")).get("error", "")
            except Exception:
                pass
            raise BackendError(f"{url} returned HTTP {exc.code}: {detail}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, socket.timeout):
                raise BackendTimeoutError(f"{url} did not answer within {self.timeout}s") from exc
            raise BackendError(f"{url} unreachable: {exc.reason}") from exc
        try:
            parsed = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"{url} returned a non-JSON body") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError(f"{url} returned a non-object body")
        return parsed

    def detect(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]:
        body = {"image_png_b64": _b64_image(image), "min_confidence": min_confidence}
        resp = self._post("/v1/detect", body)
        dets = self._parse_objects(resp, with_masks=False)
        return sort_detections([d for d in dets if d.confidence >= min_confidence])

    def segment(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]:
        body = {"image_png_b64": _b64_image(image), "min_confidence": min_confidence}
        resp = self._post("/v1/segment", body)
        dets = self._parse_objects(resp, with_masks=True)
        for det in dets:
            _check_segment_invariants(det, image, self.base_url)
        return sort_detections([d for d in dets if d.confidence >= min_confidence])

    def remove_background(self, crop: ImageBuffer, *, object_id: int | None = None) -> BinaryMask:
        resp = self._post("/v1/remove_background", {"image_png_b64": _b64_image(crop)})
        b64 = resp.get("mask_png_b64")
        if not isinstance(b64, str):
            raise ProtocolError(f"{self.base_url} remove_background response lacks mask_png_b64")
        try:
            mask = decode_mask_png(base64.b64decode(b64))
        except Exception as exc:
            raise ProtocolError(f"{self.base_url} returned an undecodable mask PNG") from exc
        if (mask.width, mask.height) != (crop.width, crop.height):
            raise ProtocolError(
                f"{self.base_url} returned a {mask.width}x{mask.height} mask for a "
                f"{crop.width}x{crop.height} crop"
            )
        return mask

    def inpaint(
        self,
        image: ImageBuffer,
        mask: BinaryMask,
        prompt: str,
        seed: int,
        steps: int,
        guidance: float,
    ) -> ImageBuffer:
        if (mask.width, mask.height) != (image.width, image.height):
            raise ValueError(
                f"mask is {mask.width}x{mask.height}, image is {image.width}x{image.height}"
            )
        if not mask.to_bool().any():
            return image
        body = {
            "image_png_b64": _b64_image(image),
            "mask_png_b64": base64.b64encode(encode_mask_png(mask)).decode("ascii"),
            "prompt": prompt,
            "seed": seed,
            "steps": steps,
            "guidance": guidance,
        }
        resp = self._post("/v1/inpaint", body)
        b64 = resp.get("image_png_b64")
        if not isinstance(b64, str):
            raise ProtocolError(f"{self.base_url} inpaint response lacks image_png_b64")
        try:
            result = decode_image_png(base64.b64decode(b64))
        except Exception as exc:
            raise ProtocolError(f"{self.base_url} returned an undecodable image PNG") from exc
        if (result.width, result.height) != (image.width, image.height):
            raise ProtocolError(
                f"{self.base_url} returned a {result.width}x{result.height} image for a "
                f"{image.width}x{image.height} input"
            )
        # Diffusion backends may drift unmasked pixels (re-encoding noise);
        # merge through the mask so the no-touch contract holds regardless.
        hole = mask.to_bool()
        merged = image.to_array().copy()
        merged[hole] = result.to_array()[hole]
        return ImageBuffer.from_array(merged)

    def _parse_objects(self, resp: dict[str, Any], *, with_masks: bool) -> list[DetectedObject]:
        objs = resp.get("objects")
        if not isinstance(objs, list):
            raise ProtocolError(f"{self.base_url} response lacks an 'objects' list")
        out = []
        for obj in objs:
            _validate_wire_object(obj, self.base_url)
            out.append(_wire_object_to_detection(obj, with_mask=with_masks, origin=self.base_url))
        return out


def _b64_image(image: ImageBuffer) -> str:
    return base64.b64encode(encode_image_png(image)).decode("ascii")


def make_backend(spec: BackendSpec, image_name: str | None = None, variant: str = "original"):
    """Instantiate the backend object a spec describes."""
    if spec.kind == "fixture":
        return FixtureBackend(spec.locator, image_name=image_name, variant=variant)
    return HttpBackend(spec.locator)
