"""Restoration quality evaluation: scripted distortions, detector-based
confidence scoring, and the aggregate metrics plus CSV scatter export.

Metric convention: every percentage in this module is an absolute
percentage point of detector confidence (confidence x 100), not a relative
change. "Mean variation" is the mean absolute deviation of a restored
confidence from the ground-truth confidence.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .backends import Detector
from .geometry import BBox, ImageBuffer, iou

DISTORT_KINDS = ("blackout", "gaussian_blur", "noise")


@dataclass(frozen=True)
class ScoreRecord:
    image_id: str
    true_class: str
    g: float
    d: float
    r: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for label, value in [("g", self.g), ("d", self.d), *self.r.items()]:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"confidence {label}={value} outside [0,1] for {self.image_id}")


@dataclass(frozen=True)
class MetricBlock:
    count: int
    average_drop: float
    average_gain: dict[str, float]
    mean_variation: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "average_drop_pct_points": self.average_drop,
            "average_gain_pct_points": dict(self.average_gain),
            "mean_variation_pct_points": dict(self.mean_variation),
        }


@dataclass(frozen=True)
class EvalReport:
    record_count: int
    methods: tuple[str, ...]
    overall: MetricBlock
    per_class: dict[str, MetricBlock]
    config_digest: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_count": self.record_count,
            "methods": list(self.methods),
            "metric_units": "absolute percentage points of confidence",
            "overall": self.overall.to_dict(),
            "per_class": {cls: block.to_dict() for cls, block in sorted(self.per_class.items())},
            "config_digest": self.config_digest,
        }


# ---------------------------------------------------------------------------
# distortion


def distort(image: ImageBuffer, region: BBox, kind: str, seed: int, strength: float) -> ImageBuffer:
    """Damage one region of the image; pixels outside it are untouched."""
    if kind not in DISTORT_KINDS:
        raise ValueError(f"unknown distortion kind {kind!r}")
    if region.x + region.w > image.width or region.y + region.h > image.height:
        raise ValueError(f"region {region} exceeds image bounds {image.width}x{image.height}")
    arr = image.to_array().copy()
    window = arr[region.y : region.y + region.h, region.x : region.x + region.w]

    if kind == "blackout":
        window[:, :, :3] = 0
        window[:, :, 3] = 255
    elif kind == "gaussian_blur":
        if strength > 0:
            window[:, :, :] = _gaussian_blur(window, strength)
    else:  # noise
        if strength > 0:
            rng = np.random.default_rng(seed)
            delta = rng.uniform(-strength, strength, size=window[:, :, :3].shape)
            noisy = window[:, :, :3].astype(np.float64) + delta
            window[:, :, :3] = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)

    return ImageBuffer.from_array(arr)


def _conv1d(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad_width = [(0, 0)] * arr.ndim
    pad_width[axis] = (radius, radius)
    padded = np.pad(arr, pad_width, mode="edge")
    out = np.zeros_like(arr)
    for i, k in enumerate(kernel):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(i, i + arr.shape[axis])
        out += k * padded[tuple(sl)]
    return out


def _gaussian_blur(window: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian over the region crop, edge-replicated at borders."""
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    work = window.astype(np.float64)
    work = _conv1d(work, kernel, axis=0)
    work = _conv1d(work, kernel, axis=1)
    return np.clip(np.rint(work), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# scoring


def measure(
    image: ImageBuffer,
    detector: Detector,
    true_class: str,
    *,
    reference_bbox: BBox | None = None,
    iou_threshold: float | None = None,
) -> float:
    """Highest confidence the detector assigns to `true_class`; 0.0 if the
    class is not detected at all.

    Matching is by class label alone unless both a reference box and an IoU
    threshold are given, in which case detections must also overlap the
    reference at or above the threshold.
    """
    detections = detector.detect(image, 0.0)
    best = 0.0
    for det in detections:
        if det.class_label != true_class:
            continue
        if reference_bbox is not None and iou_threshold is not None:
            if iou(det.bbox, reference_bbox) < iou_threshold:
                continue
        best = max(best, det.confidence)
    return best


def average_drop(records: Iterable[ScoreRecord]) -> float:
    """Mean of (ground truth - distorted) in percentage points.

    math.fsum keeps the mean exactly rounded, hence independent of record
    order.
    """
    records = list(records)
    if not records:
        raise ValueError("average_drop requires at least one record")
    return math.fsum((rec.g - rec.d) * 100.0 for rec in records) / len(records)


def _select(records: Iterable[ScoreRecord], method: str, class_filter: str | None) -> list[ScoreRecord]:
    records = list(records)
    if class_filter is not None:
        records = [rec for rec in records if rec.true_class == class_filter]
    if not records:
        raise ValueError(f"no records selected (class_filter={class_filter!r})")
    for rec in records:
        if method not in rec.r:
            raise ValueError(f"record {rec.image_id} has no score for method {method!r}")
    return records


def average_gain(records: Iterable[ScoreRecord], method: str, class_filter: str | None = None) -> float:
    """Mean of (restored - distorted) in percentage points; negative when a
    method makes things worse."""
    selected = _select(records, method, class_filter)
    return math.fsum((rec.r[method] - rec.d) * 100.0 for rec in selected) / len(selected)


def mean_variation(records: Iterable[ScoreRecord], method: str, class_filter: str | None = None) -> float:
    """Mean absolute deviation of restored confidence from ground truth, in
    percentage points."""
    selected = _select(records, method, class_filter)
    return math.fsum(abs(rec.r[method] - rec.g) * 100.0 for rec in selected) / len(selected)


# ---------------------------------------------------------------------------
# reporting


def _metric_block(records: list[ScoreRecord], methods: tuple[str, ...]) -> MetricBlock:
    return MetricBlock(
        count=len(records),
        average_drop=average_drop(records),
        average_gain={m: average_gain(records, m) for m in methods},
        mean_variation={m: mean_variation(records, m) for m in methods},
    )


def export_report(
    records: Iterable[ScoreRecord],
    methods: Iterable[str],
    config_digest: str = "",
) -> tuple[EvalReport, str]:
    """Aggregate all metrics and produce the scatter CSV (one row per record,
    sorted by image_id, six fractional digits)."""
    records = sorted(records, key=lambda rec: rec.image_id)
    methods = tuple(methods)
    if not records:
        raise ValueError("export_report requires at least one record")

    classes = sorted({rec.true_class for rec in records})
    report = EvalReport(
        record_count=len(records),
        methods=methods,
        overall=_metric_block(records, methods),
        per_class={
            cls: _metric_block([rec for rec in records if rec.true_class == cls], methods)
            for cls in classes
        },
        config_digest=config_digest,
    )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id", "class", "g", "d", *methods])
    for rec in records:
        writer.writerow(
            [rec.image_id, rec.true_class, f"{rec.g:.6f}", f"{rec.d:.6f}"]
            + [f"{rec.r[m]:.6f}" for m in methods]
        )
    return report, buf.getvalue()


def records_to_json(records: Iterable[ScoreRecord]) -> list[dict[str, Any]]:
    return [
        {"image_id": rec.image_id, "true_class": rec.true_class, "g": rec.g, "d": rec.d, "r": dict(rec.r)}
        for rec in sorted(records, key=lambda rec: rec.image_id)
    ]


def records_from_json(docs: list[dict[str, Any]]) -> list[ScoreRecord]:
    return [
        ScoreRecord(
            image_id=doc["image_id"],
            true_class=doc["true_class"],
            g=doc["g"],
            d=doc["d"],
            r=dict(doc["r"]),
        )
        for doc in docs
    ]
