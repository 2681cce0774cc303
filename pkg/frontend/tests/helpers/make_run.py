"""Build a fixture-backed pipeline run for the editor tests.

Usage: python3 make_run.py <workdir>
Prints the run directory path on stdout.
"""
from __future__ import annotations

import base64
import json
import sys
from pathlib import Path

import numpy as np

from restorelab.config import parse_config
from restorelab.geometry import BBox, BinaryMask, crop_mask, pad_bbox
from restorelab.pngio import encode_mask_png, save_image, save_mask
from restorelab.geometry import ImageBuffer
from restorelab.runner import run_pipeline

OBJECTS = [
    ("zebra", 0.91, BBox(16, 16, 28, 24)),
    ("horse", 0.80, BBox(56, 52, 24, 20)),
]
SIZE = (112, 96)


def rect_mask(width: int, height: int, box: BBox) -> BinaryMask:
    arr = np.zeros((height, width), dtype=bool)
    arr[box.y : box.y + box.h, box.x : box.x + box.w] = True
    return BinaryMask.from_array(arr)


def main() -> int:
    workdir = Path(sys.argv[1])
    fixture_dir = workdir / "fixtures"
    fixture_dir.mkdir(parents=True, exist_ok=True)
    (fixture_dir / "masks").mkdir(exist_ok=True)
    width, height = SIZE

    rng = np.random.default_rng(3)
    arr = rng.integers(40, 200, size=(height, width, 4), dtype=np.uint8)
    arr[:, :, 3] = 255
    for i, (_, _, box) in enumerate(OBJECTS):
        arr[box.y : box.y + box.h, box.x : box.x + box.w] = (200 - 60 * i, 60, 60 + 90 * i, 255)
    save_image(fixture_dir / "scene.png", ImageBuffer.from_array(arr))

    pad = 8
    wire_objects = []
    background_masks = {}
    for object_id, (label, conf, box) in enumerate(OBJECTS):
        mask = rect_mask(width, height, box)
        wire_objects.append({
            "class": label,
            "confidence": conf,
            "bbox": [box.x, box.y, box.w, box.h],
            "mask_png_b64": base64.b64encode(encode_mask_png(mask)).decode("ascii"),
        })
        padded = pad_bbox(box, pad, SIZE)
        mask_name = f"masks/scene.bg{object_id}.png"
        save_mask(fixture_dir / mask_name, crop_mask(mask, padded))
        background_masks[str(object_id)] = mask_name
    (fixture_dir / "scene.fixtures.json").write_text(
        json.dumps({"objects": wire_objects, "background_masks": background_masks})
    )

    config = parse_config(json.dumps({
        "isolation_path": "PATH2",
        "backends": {
            "segmenter": {"fixture": str(fixture_dir)},
            "inpainter": {"fixture": str(fixture_dir)},
        },
    }))
    out_root = workdir / "runs"
    out_root.mkdir(exist_ok=True)
    result = run_pipeline(config, fixture_dir / "scene.png", out_root=out_root)
    print(result.run.path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
