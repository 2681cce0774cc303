"""Model engines behind the wire endpoints.

Every engine works on (h, w, 4) uint8 RGBA arrays and returns wire-format
dicts. The real models are imported lazily at construction so the service
module stays importable without the `[models]` extra installed; install
`restorelab-sidecar[models]` to run against actual checkpoints (weights are
fetched by the model libraries on first use, never vendored).
"""
from __future__ import annotations

import numpy as np


def tight_bbox_of(mask: np.ndarray) -> list[int] | None:
    """[x, y, w, h] around the nonzero region, or None when the mask is empty."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return [int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)]


class UltralyticsDetector:
    """YOLO-family detection (proof-of-concept model, swappable)."""

    def __init__(self, model_name: str, device: str = "cpu"):
        from ultralytics import YOLO  # deferred heavyweight import

        self.model = YOLO(model_name)
        self.device = device

    def detect(self, image: np.ndarray, min_confidence: float) -> list[dict]:
        results = self.model.predict(
            image[:, :, :3], conf=max(min_confidence, 1e-4), device=self.device, verbose=False
        )
        objects = []
        for result in results:
            names = result.names
            for box in result.boxes:
                x0, y0, x1, y1 = (float(v) for v in box.xyxy[0].tolist())
                objects.append({
                    "class": names[int(box.cls[0])],
                    "confidence": round(float(box.conf[0]), 6),
                    "bbox": [max(int(x0), 0), max(int(y0), 0),
                             max(int(x1 - x0), 1), max(int(y1 - y0), 1)],
                })
        return objects


class UltralyticsSegmenter:
    """YOLO-seg instance segmentation; also backs background removal."""

    def __init__(self, model_name: str, device: str = "cpu"):
        from ultralytics import YOLO

        self.model = YOLO(model_name)
        self.device = device

    def _masks(self, image: np.ndarray, min_confidence: float) -> list[tuple[str, float, np.ndarray]]:
        from PIL import Image

        h, w = image.shape[:2]
        results = self.model.predict(
            image[:, :, :3], conf=max(min_confidence, 1e-4), device=self.device, verbose=False
        )
        out = []
        for result in results:
            if result.masks is None:
                continue
            names = result.names
            for box, mask in zip(result.boxes, result.masks.data):
                mask_arr = mask.cpu().numpy()
                if mask_arr.shape != (h, w):
                    mask_img = Image.fromarray((mask_arr * 255).astype(np.uint8))
                    mask_arr = np.asarray(mask_img.resize((w, h), Image.BILINEAR)) / 255.0
                out.append((
                    names[int(box.cls[0])],
                    round(float(box.conf[0]), 6),
                    mask_arr >= 0.5,
                ))
        return out

    def segment(self, image: np.ndarray, min_confidence: float) -> list[dict]:
        objects = []
        for class_label, confidence, mask in self._masks(image, min_confidence):
            bbox = tight_bbox_of(mask)
            if bbox is None:
                continue  # an all-empty mask carries no instance
            objects.append({
                "class": class_label,
                "confidence": confidence,
                "bbox": bbox,
                "mask": mask,
            })
        return objects

    def remove_background(self, image: np.ndarray) -> np.ndarray:
        """Foreground = union of all instance masks; falls back to a
        full-foreground mask when nothing is segmented (single-subject crops
        should never vanish entirely)."""
        h, w = image.shape[:2]
        union = np.zeros((h, w), dtype=bool)
        for _, _, mask in self._masks(image, 0.1):
            union |= mask
        if not union.any():
            union[:] = True
        return union


class DiffusionInpainter:
    """Stable-Diffusion-family inpainting with seeded generation."""

    def __init__(self, model_name: str, device: str = "cpu"):
        import torch
        from diffusers import StableDiffusionInpaintPipeline

        dtype = torch.float16 if device.startswith("cuda") else torch.float32
        self.pipeline = StableDiffusionInpaintPipeline.from_pretrained(model_name, torch_dtype=dtype)
        self.pipeline.to(device)
        self.device = device

    def inpaint(self, image: np.ndarray, mask: np.ndarray, prompt: str,
                seed: int, steps: int, guidance: float) -> np.ndarray:
        import torch
        from PIL import Image

        h, w = image.shape[:2]
        rgb = Image.fromarray(image[:, :, :3])
        mask_img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8))
        generator = torch.Generator(device=self.device).manual_seed(seed)
        result = self.pipeline(
            prompt=prompt, image=rgb, mask_image=mask_img,
            num_inference_steps=steps, guidance_scale=guidance, generator=generator,
        ).images[0]
        if result.size != (w, h):
            result = result.resize((w, h), Image.BILINEAR)
        out = np.asarray(result.convert("RGB"), dtype=np.uint8)
        rgba = image.copy()
        rgba[:, :, :3] = out
        return rgba


def build_engines(config) -> dict[str, object]:
    """Construct the real-model engines a config asks for."""
    engines: dict[str, object] = {}
    if config.detector_model:
        engines["detect"] = UltralyticsDetector(config.detector_model, config.device)
    if config.segmenter_model or config.background_model:
        segmenter = UltralyticsSegmenter(
            config.segmenter_model or config.background_model, config.device
        )
        if config.segmenter_model:
            engines["segment"] = segmenter
        if config.background_model:
            engines["remove_background"] = segmenter
    if config.inpaint_model:
        engines["inpaint"] = DiffusionInpainter(config.inpaint_model, config.device)
    return engines
