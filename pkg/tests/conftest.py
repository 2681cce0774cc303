from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np
import pytest

from restorelab.geometry import BBox, BinaryMask, ImageBuffer, crop_mask, pad_bbox
from restorelab.pngio import encode_mask_png, save_image, save_mask


def random_image(rng: np.random.Generator, width: int, height: int) -> ImageBuffer:
    arr = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
    arr[:, :, 3] = 255
    return ImageBuffer.from_array(arr)


def random_mask(rng: np.random.Generator, width: int, height: int, p: float = 0.5) -> BinaryMask:
    return BinaryMask.from_array(rng.random((height, width)) < p)


def rect_mask(width: int, height: int, box: BBox) -> BinaryMask:
    arr = np.zeros((height, width), dtype=bool)
    arr[box.y : box.y + box.h, box.x : box.x + box.w] = True
    return BinaryMask.from_array(arr)


def textured_image(width: int, height: int, seed: int = 7) -> ImageBuffer:
    """Deterministic non-uniform RGBA content."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    arr = np.empty((height, width, 4), dtype=np.uint8)
    arr[:, :, 0] = ((xx * 255) // max(width - 1, 1)).astype(np.uint8)
    arr[:, :, 1] = ((yy * 255) // max(height - 1, 1)).astype(np.uint8)
    arr[:, :, 2] = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
    arr[:, :, 3] = 255
    return ImageBuffer.from_array(arr)


def paint_box(image: ImageBuffer, box: BBox, rgba: tuple[int, int, int, int]) -> ImageBuffer:
    arr = image.to_array().copy()
    arr[box.y : box.y + box.h, box.x : box.x + box.w] = rgba
    return ImageBuffer.from_array(arr)


def write_fixture_image(
    directory: Path,
    name: str,
    size: tuple[int, int],
    objects: list[dict],
    *,
    instance_pad: int = 8,
    variants: dict[str, list[dict]] | None = None,
    image: ImageBuffer | None = None,
) -> Path:
    """Create `<name>.png` plus matching `<name>.fixtures.json`.

    Each object spec is {"class", "confidence", "bbox": BBox}; its mask is the
    filled bbox rectangle (so the tight-bbox invariant holds by construction)
    and the background-removal mask is that mask cropped to the padded bbox,
    keyed by the object's rank in detection sort order.
    """
    width, height = size
    if image is None:
        image = textured_image(width, height)
        palette = [(220, 40, 40, 255), (40, 80, 220, 255), (40, 200, 90, 255)]
        for i, spec in enumerate(objects):
            image = paint_box(image, spec["bbox"], palette[i % len(palette)])
    image_path = directory / f"{name}.png"
    save_image(image_path, image)

    ranked = sorted(
        range(len(objects)),
        key=lambda i: (-objects[i]["confidence"], objects[i]["bbox"].y, objects[i]["bbox"].x),
    )

    wire_objects = []
    for spec in objects:
        box = spec["bbox"]
        mask = rect_mask(width, height, box)
        wire_objects.append(
            {
                "class": spec["class"],
                "confidence": spec["confidence"],
                "bbox": [box.x, box.y, box.w, box.h],
                "mask_png_b64": base64.b64encode(encode_mask_png(mask)).decode("ascii"),
            }
        )

    background_masks = {}
    (directory / "masks").mkdir(exist_ok=True)
    for object_id, source_index in enumerate(ranked):
        box = objects[source_index]["bbox"]
        full = rect_mask(width, height, box)
        padded = pad_bbox(box, instance_pad, (width, height))
        mask_name = f"masks/{name}.bg{object_id}.png"
        save_mask(directory / mask_name, crop_mask(full, padded))
        background_masks[str(object_id)] = mask_name

    record: dict = {"objects": wire_objects, "background_masks": background_masks}
    if variants is not None:
        record["variants"] = {
            variant: [
                {
                    "class": spec["class"],
                    "confidence": spec["confidence"],
                    "bbox": [spec["bbox"].x, spec["bbox"].y, spec["bbox"].w, spec["bbox"].h],
                    "mask_png_b64": base64.b64encode(
                        encode_mask_png(rect_mask(width, height, spec["bbox"]))
                    ).decode("ascii"),
                }
                for spec in specs
            ]
            for variant, specs in variants.items()
        }
    (directory / f"{name}.fixtures.json").write_text(json.dumps(record, indent=2), encoding="utf-8")
    return image_path


def fixture_config_doc(fixture_dir: Path, path: str = "PATH2", **overrides) -> dict:
    doc = {
        "isolation_path": path,
        "backends": {
            "detector": {"fixture": str(fixture_dir)},
            "segmenter": {"fixture": str(fixture_dir)},
            "background_remover": {"fixture": str(fixture_dir)},
            "inpainter": {"fixture": str(fixture_dir)},
        },
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def fixture_dir(tmp_path: Path) -> Path:
    d = tmp_path / "fixtures"
    d.mkdir()
    return d
