"""Turn an input image into isolated scene objects plus a background plate.

Path 1 pairs an object detector with a background remover; Path 2 gets
instance masks straight from a segmenter. Both produce the same Scene shape.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .backends import BackgroundRemover, DetectedObject, Detector, Segmenter
from .config import PipelineConfig
from .geometry import (
    BBox,
    BinaryMask,
    ImageBuffer,
    crop_image,
    crop_mask,
    morph,
    pad_bbox,
)


@dataclass(frozen=True)
class SceneObject:
    """One isolated instance: a padded crop, its crop-local mask, and its
    placement in the scene."""

    id: int
    class_label: str
    confidence: float
    crop: ImageBuffer
    mask: BinaryMask
    origin: tuple[int, int]
    z_layer: int = 0
    scale: float = 1.0
    visible: bool = True
    prompt: str | None = None
    provenance: str = "isolate"

    def __post_init__(self):
        if (self.mask.width, self.mask.height) != (self.crop.width, self.crop.height):
            raise ValueError(
                f"object {self.id}: mask {self.mask.width}x{self.mask.height} does not match "
                f"crop {self.crop.width}x{self.crop.height}"
            )
        if self.scale <= 0:
            raise ValueError(f"object {self.id}: scale must be > 0")


@dataclass(frozen=True)
class Scene:
    canvas: tuple[int, int]
    background: ImageBuffer
    objects: tuple[SceneObject, ...]

    def __post_init__(self):
        if (self.background.width, self.background.height) != self.canvas:
            raise ValueError(
                f"background {self.background.width}x{self.background.height} does not match "
                f"canvas {self.canvas[0]}x{self.canvas[1]}"
            )
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("scene object ids must be unique")

    def object_by_id(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)


def _partition_detections(
    detections: list[DetectedObject], min_confidence: float
) -> tuple[list[DetectedObject], list[DetectedObject]]:
    kept = [d for d in detections if d.confidence >= min_confidence]
    dropped = [d for d in detections if d.confidence < min_confidence]
    return kept, dropped


def _drop_report(kept: list[DetectedObject], dropped: list[DetectedObject]) -> dict:
    def describe(dets):
        return [
            {"class": d.class_label, "confidence": d.confidence,
             "bbox": [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h]}
            for d in dets
        ]

    return {"kept": describe(kept), "dropped": describe(dropped)}


def isolate_path1(
    image: ImageBuffer,
    detector: Detector,
    background_remover: BackgroundRemover,
    config: PipelineConfig,
) -> tuple[Scene, dict]:
    """Detect, pad, crop, then call the background remover per crop.

    Returns the scene plus a kept/dropped report for the stage manifest.
    """
    canvas = (image.width, image.height)
    detections = detector.detect(image, 0.0)
    kept, dropped = _partition_detections(detections, config.min_confidence)
    objects = []
    for i, det in enumerate(kept):
        padded = pad_bbox(det.bbox, config.instance_pad, canvas)
        crop = crop_image(image, padded)
        mask = background_remover.remove_background(crop, object_id=i)
        objects.append(
            SceneObject(
                id=i,
                class_label=det.class_label,
                confidence=det.confidence,
                crop=crop,
                mask=mask,
                origin=(padded.x, padded.y),
            )
        )
    scene = Scene(canvas=canvas, background=image, objects=tuple(objects))
    return scene, _drop_report(kept, dropped)


def isolate_path2(
    image: ImageBuffer,
    segmenter: Segmenter,
    config: PipelineConfig,
) -> tuple[Scene, dict]:
    """Single-call instance segmentation; masks are cropped to the padded bbox."""
    canvas = (image.width, image.height)
    detections = segmenter.segment(image, 0.0)
    kept, dropped = _partition_detections(detections, config.min_confidence)
    objects = []
    for i, det in enumerate(kept):
        padded = pad_bbox(det.bbox, config.instance_pad, canvas)
        crop = crop_image(image, padded)
        assert det.mask is not None  # segment() contract
        mask = crop_mask(det.mask, padded)
        objects.append(
            SceneObject(
                id=i,
                class_label=det.class_label,
                confidence=det.confidence,
                crop=crop,
                mask=mask,
                origin=(padded.x, padded.y),
            )
        )
    scene = Scene(canvas=canvas, background=image, objects=tuple(objects))
    return scene, _drop_report(kept, dropped)


def extract_background(
    image: ImageBuffer,
    objects: tuple[SceneObject, ...] | list[SceneObject],
    hole_dilation: int,
) -> tuple[ImageBuffer, BinaryMask]:
    """Background plate plus the union of object footprints to inpaint over.

    The plate is the input image itself; the holes mask (every object mask
    placed at its origin, dilated by `hole_dilation`) tells the background
    restorer what to fill.
    """
    if hole_dilation < 0:
        raise ValueError("hole_dilation must be >= 0")
    holes = np.zeros((image.height, image.width), dtype=bool)
    for obj in objects:
        x, y = obj.origin
        holes[y : y + obj.mask.height, x : x + obj.mask.width] |= obj.mask.to_bool()
    holes_mask = BinaryMask.from_array(holes)
    if hole_dilation >= 1 and holes.any():
        holes_mask = morph(holes_mask, "dilate", hole_dilation)
    return image, holes_mask


def refine_masks(scene: Scene, kind: str, radius: int) -> Scene:
    """Apply one morphological pass to every object mask."""
    refined = tuple(replace(obj, mask=morph(obj.mask, kind, radius)) for obj in scene.objects)
    return replace(scene, objects=refined)
