"""FastAPI service speaking the restorelab backend wire protocol.

Only configured endpoints are registered, every request and response is
validated against the shared JSON schemas, and the segment handler derives
each bbox from its mask so the tight-bbox invariant holds by construction.
"""
from __future__ import annotations

import base64
import io
import json
import threading
from functools import lru_cache
from pathlib import Path

import jsonschema
import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from .config import SidecarConfig
from .engines import tight_bbox_of


class SchemaStore:
    def __init__(self, schema_dir: Path):
        self.schema_dir = Path(schema_dir)
        self._load = lru_cache(maxsize=None)(self._load_uncached)

    def _load_uncached(self, name: str) -> dict:
        path = self.schema_dir / f"{name}.schema.json"
        return json.loads(path.read_text(encoding="utf-8"))

    def validate(self, name: str, payload) -> None:
        jsonschema.validate(payload, self._load(name))


class WireError(Exception):
    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


def _decode_image_b64(b64: str, max_dim: int) -> np.ndarray:
    try:
        data = base64.b64decode(b64, validate=True)
        image = Image.open(io.BytesIO(data)).convert("RGBA")
    except Exception as exc:
        raise WireError(f"undecodable PNG payload: {exc}", 400) from exc
    if image.width > max_dim or image.height > max_dim:
        raise WireError(
            f"image {image.width}x{image.height} exceeds the {max_dim}px limit", 400
        )
    return np.asarray(image, dtype=np.uint8)


def _decode_mask_b64(b64: str, max_dim: int) -> np.ndarray:
    try:
        data = base64.b64decode(b64, validate=True)
        mask = Image.open(io.BytesIO(data)).convert("L")
    except Exception as exc:
        raise WireError(f"undecodable mask PNG payload: {exc}", 400) from exc
    if mask.width > max_dim or mask.height > max_dim:
        raise WireError(f"mask {mask.width}x{mask.height} exceeds the {max_dim}px limit", 400)
    return np.asarray(mask, dtype=np.uint8) >= 128


def _encode_image_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGBA").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _encode_mask_b64(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(config: SidecarConfig, engines: dict[str, object]) -> FastAPI:
    """Build the service around a role->engine map.

    `engines` may contain any subset of detect/segment/remove_background/
    inpaint; only those endpoints are advertised.
    """
    app = FastAPI(title="restorelab-sidecar")
    schemas = SchemaStore(config.schema_dir)
    inpaint_gate = threading.Semaphore(config.inpaint_workers)

    async def _read_validated(request: Request, schema: str) -> dict:
        try:
            body = await request.json()
        except Exception as exc:
            raise WireError(f"request body is not valid JSON: {exc}", 400) from exc
        try:
            schemas.validate(schema, body)
        except jsonschema.ValidationError as exc:
            raise WireError(f"request violates {schema}: {exc.message}", 400) from exc
        return body

    def _respond(schema: str, payload: dict) -> JSONResponse:
        schemas.validate(schema, payload)  # a violation here is a server bug
        return JSONResponse(payload)

    @app.exception_handler(WireError)
    async def _wire_error(request: Request, exc: WireError):
        error = {"error": str(exc)}
        schemas.validate("error_response", error)
        return JSONResponse(error, status_code=exc.status)

    @app.exception_handler(Exception)
    async def _model_error(request: Request, exc: Exception):
        return JSONResponse({"error": f"model failure: {exc}"}, status_code=500)

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    if "detect" in engines:
        @app.post("/v1/detect")
        async def detect(request: Request):
            body = await _read_validated(request, "detect_request")
            image = _decode_image_b64(body["image_png_b64"], config.max_image_dim)
            objects = engines["detect"].detect(image, float(body["min_confidence"]))
            objects = [o for o in objects if o["confidence"] >= body["min_confidence"]]
            return _respond("detect_response", {"objects": objects})

    if "segment" in engines:
        @app.post("/v1/segment")
        async def segment(request: Request):
            body = await _read_validated(request, "segment_request")
            image = _decode_image_b64(body["image_png_b64"], config.max_image_dim)
            raw = engines["segment"].segment(image, float(body["min_confidence"]))
            objects = []
            for obj in raw:
                if obj["confidence"] < body["min_confidence"]:
                    continue
                mask = obj["mask"]
                bbox = tight_bbox_of(mask)
                if bbox is None:
                    continue
                objects.append({
                    "class": obj["class"],
                    "confidence": obj["confidence"],
                    "bbox": bbox,  # recomputed from the mask: tight by construction
                    "mask_png_b64": _encode_mask_b64(mask),
                })
            return _respond("segment_response", {"objects": objects})

    if "remove_background" in engines:
        @app.post("/v1/remove_background")
        async def remove_background(request: Request):
            body = await _read_validated(request, "remove_background_request")
            image = _decode_image_b64(body["image_png_b64"], config.max_image_dim)
            mask = engines["remove_background"].remove_background(image)
            if mask.shape != image.shape[:2]:
                raise WireError(
                    f"engine returned a {mask.shape} mask for a {image.shape[:2]} image", 500
                )
            return _respond("remove_background_response", {"mask_png_b64": _encode_mask_b64(mask)})

    if "inpaint" in engines:
        @app.post("/v1/inpaint")
        async def inpaint(request: Request):
            body = await _read_validated(request, "inpaint_request")
            image = _decode_image_b64(body["image_png_b64"], config.max_image_dim)
            mask = _decode_mask_b64(body["mask_png_b64"], config.max_image_dim)
            if mask.shape != image.shape[:2]:
                raise WireError(
                    f"mask {mask.shape} does not match image {image.shape[:2]}", 400
                )
            with inpaint_gate:  # bounded model workers
                result = engines["inpaint"].inpaint(
                    image, mask, body["prompt"], int(body["seed"]),
                    int(body["steps"]), float(body["guidance"]),
                )
            merged = image.copy()
            merged[mask] = result[mask]  # unmasked pixels stay untouched
            return _respond("inpaint_response", {"image_png_b64": _encode_image_b64(merged)})

    return app


def create_default_app(config: SidecarConfig | None = None) -> FastAPI:
    """App wired to the real pretrained models (requires the models extra)."""
    from .engines import build_engines

    config = config or SidecarConfig()
    return create_app(config, build_engines(config))
