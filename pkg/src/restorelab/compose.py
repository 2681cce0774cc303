"""Layered scene edits and the deterministic z-ordered renderer.

Higher z_layer means nearer the camera: it is drawn later and occludes
lower layers. With a depth scale factor f, an object on layer z is drawn at
scale * f^(-z), so pushing an object away (negative z) shrinks it when
f < 1 is configured; the default f = 1.0 leaves size independent of z.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from PIL import Image

from .backends import Inpainter
from .errors import NotFoundError
from .geometry import BinaryMask, ImageBuffer
from .isolate import Scene, SceneObject
from .restore import RestoreParams, tune_object

EDIT_OPS = ("move", "remove", "set_visibility", "set_scale", "tune")


@dataclass(frozen=True)
class SceneEdit:
    op: str
    object_id: int
    dx: int = 0
    dy: int = 0
    dz: int = 0
    visible: bool | None = None
    scale: float | None = None
    prompt: str | None = None

    def __post_init__(self):
        if self.op not in EDIT_OPS:
            raise ValueError(f"unknown edit op {self.op!r}, expected one of {EDIT_OPS}")
        if self.op == "set_visibility" and self.visible is None:
            raise ValueError("set_visibility edit requires 'visible'")
        if self.op == "set_scale":
            if self.scale is None:
                raise ValueError("set_scale edit requires 'scale'")
            if self.scale <= 0:
                raise ValueError("scale must be > 0")
        if self.op == "tune" and not self.prompt:
            raise ValueError("tune edit requires a non-empty 'prompt'")


def edit_from_dict(doc: dict[str, Any]) -> SceneEdit:
    known = {"op", "object_id", "dx", "dy", "dz", "visible", "scale", "prompt"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown edit keys: {sorted(unknown)}")
    if "op" not in doc or "object_id" not in doc:
        raise ValueError("an edit requires 'op' and 'object_id'")
    return SceneEdit(
        op=doc["op"],
        object_id=int(doc["object_id"]),
        dx=int(doc.get("dx", 0)),
        dy=int(doc.get("dy", 0)),
        dz=int(doc.get("dz", 0)),
        visible=doc.get("visible"),
        scale=doc.get("scale"),
        prompt=doc.get("prompt"),
    )


def edit_to_dict(edit: SceneEdit) -> dict[str, Any]:
    doc: dict[str, Any] = {"op": edit.op, "object_id": edit.object_id}
    if edit.op == "move":
        doc.update(dx=edit.dx, dy=edit.dy, dz=edit.dz)
    elif edit.op == "set_visibility":
        doc["visible"] = edit.visible
    elif edit.op == "set_scale":
        doc["scale"] = edit.scale
    elif edit.op == "tune":
        doc["prompt"] = edit.prompt
    return doc


def apply_edit(
    scene: Scene,
    edit: SceneEdit,
    *,
    inpainter: Inpainter | None = None,
    params: RestoreParams | None = None,
) -> Scene:
    """Apply one edit, returning a new scene; the input is never mutated.

    `tune` edits re-run the inpainter and therefore require one, plus its
    restore parameters.
    """
    try:
        target = scene.object_by_id(edit.object_id)
    except KeyError:
        raise NotFoundError(f"scene has no object {edit.object_id}") from None

    if edit.op == "remove":
        return replace(scene, objects=tuple(o for o in scene.objects if o.id != edit.object_id))

    if edit.op == "move":
        updated = replace(
            target,
            origin=(target.origin[0] + edit.dx, target.origin[1] + edit.dy),
            z_layer=target.z_layer + edit.dz,
        )
    elif edit.op == "set_visibility":
        updated = replace(target, visible=bool(edit.visible))
    elif edit.op == "set_scale":
        assert edit.scale is not None
        updated = replace(target, scale=edit.scale)
    else:  # tune
        if inpainter is None or params is None:
            raise ValueError("tune edits require an inpainter and restore params")
        assert edit.prompt is not None
        updated = tune_object(target, edit.prompt, inpainter, params)

    return replace(
        scene,
        objects=tuple(updated if o.id == edit.object_id else o for o in scene.objects),
    )


def apply_edits(
    scene: Scene,
    edits: list[SceneEdit],
    *,
    inpainter: Inpainter | None = None,
    params: RestoreParams | None = None,
) -> Scene:
    for edit in edits:
        scene = apply_edit(scene, edit, inpainter=inpainter, params=params)
    return scene


def _resample(obj: SceneObject, factor: float) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Bilinear-resample crop and mask; returns arrays plus the draw origin,
    anchored so the crop center stays put."""
    w, h = obj.crop.width, obj.crop.height
    nw = max(1, round(w * factor))
    nh = max(1, round(h * factor))
    if (nw, nh) == (w, h):
        crop_arr = obj.crop.to_array()
        mask_arr = obj.mask.to_bool()
    else:
        crop_im = Image.frombytes("RGBA", (w, h), obj.crop.pixels).resize((nw, nh), Image.BILINEAR)
        mask_im = Image.frombytes("L", (w, h), obj.mask.values).resize((nw, nh), Image.BILINEAR)
        crop_arr = np.asarray(crop_im, dtype=np.uint8)
        mask_arr = np.asarray(mask_im, dtype=np.uint8) >= 128
    x = obj.origin[0] + round((w - nw) / 2.0)
    y = obj.origin[1] + round((h - nh) / 2.0)
    return crop_arr, mask_arr, x, y


def render(scene: Scene, depth_scale_factor: float = 1.0) -> ImageBuffer:
    """Painter's-algorithm composite: background first, then visible objects
    by ascending z_layer (ties by ascending id), clipped to the canvas."""
    if depth_scale_factor <= 0:
        raise ValueError("depth_scale_factor must be > 0")
    cw, ch = scene.canvas
    out = scene.background.to_array().copy()

    order = sorted((o for o in scene.objects if o.visible), key=lambda o: (o.z_layer, o.id))
    for obj in order:
        factor = obj.scale * depth_scale_factor ** (-obj.z_layer)
        crop_arr, mask_arr, x, y = _resample(obj, factor)
        nh, nw = mask_arr.shape

        dst_x0, dst_y0 = max(x, 0), max(y, 0)
        dst_x1, dst_y1 = min(x + nw, cw), min(y + nh, ch)
        if dst_x0 >= dst_x1 or dst_y0 >= dst_y1:
            continue  # fully outside the canvas
        src_x0, src_y0 = dst_x0 - x, dst_y0 - y
        src_x1, src_y1 = src_x0 + (dst_x1 - dst_x0), src_y0 + (dst_y1 - dst_y0)

        src = crop_arr[src_y0:src_y1, src_x0:src_x1]
        sel = mask_arr[src_y0:src_y1, src_x0:src_x1]
        dst = out[dst_y0:dst_y1, dst_x0:dst_x1]
        dst[sel] = src[sel]
        dst[sel, 3] = 255

    return ImageBuffer.from_array(out)


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    """JSON-ready scene description; pixel payloads are referenced by the
    artifact names used in the compose stage directory."""
    return {
        "canvas": [scene.canvas[0], scene.canvas[1]],
        "background": "background.png",
        "objects": [
            {
                "id": o.id,
                "class": o.class_label,
                "confidence": o.confidence,
                "origin": [o.origin[0], o.origin[1]],
                "z_layer": o.z_layer,
                "scale": o.scale,
                "visible": o.visible,
                "prompt": o.prompt,
                "provenance": o.provenance,
                "crop": f"{o.id}_crop.png",
                "mask": f"{o.id}_mask.png",
            }
            for o in scene.objects
        ],
    }


def scene_from_dict(
    doc: dict[str, Any],
    background: ImageBuffer,
    crops: dict[int, ImageBuffer],
    masks: dict[int, BinaryMask],
) -> Scene:
    objects = []
    for entry in doc["objects"]:
        oid = entry["id"]
        objects.append(
            SceneObject(
                id=oid,
                class_label=entry["class"],
                confidence=entry["confidence"],
                crop=crops[oid],
                mask=masks[oid],
                origin=(entry["origin"][0], entry["origin"][1]),
                z_layer=entry["z_layer"],
                scale=entry["scale"],
                visible=entry["visible"],
                prompt=entry.get("prompt"),
                provenance=entry.get("provenance", "isolate"),
            )
        )
    return Scene(
        canvas=(doc["canvas"][0], doc["canvas"][1]),
        background=background,
        objects=tuple(objects),
    )
