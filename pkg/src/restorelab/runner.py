"""End-to-end orchestration: full pipeline runs, the direct baseline, batch
scene edits, and the evaluation driver.

Each stage writes a complete artifact set for the next one, so any stage
directory can be inspected or re-consumed on its own; manifests chain input
digests to the previous stage's outputs.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import stage_store
from .backends import DetectedObject, make_backend
from .compose import (
    SceneEdit,
    apply_edits,
    edit_from_dict,
    edit_to_dict,
    render,
    scene_from_dict,
    scene_to_dict,
)
from .config import (
    CONFIG_FILE_NAME,
    EDITS_STAGE,
    PipelineConfig,
    config_digest,
    parse_config,
    resolve_direct_plan,
    resolve_stage_plan,
)
from .errors import NotFoundError
from .evaluate import ScoreRecord, distort, export_report, measure, records_to_json
from .geometry import BBox, BinaryMask, ImageBuffer, crop_mask, restoration_region
from .isolate import (
    Scene,
    extract_background,
    isolate_path1,
    isolate_path2,
    refine_masks,
)
from .pngio import (
    decode_image_png,
    decode_mask_png,
    encode_image_png,
    encode_mask_png,
    load_image,
    load_mask,
)
from .restore import RestoreParams, direct_restore, restore_background, restore_object
from .stage_store import RunHandle, StageManifest


@dataclass
class RunResult:
    run: RunHandle
    scene: Scene
    composite: ImageBuffer
    manifests: list[StageManifest]


def restore_params_from_config(config: PipelineConfig) -> RestoreParams:
    return RestoreParams(
        prompt_template=config.inpaint.prompt_template,
        seed=config.inpaint.seed,
        steps=config.inpaint.steps,
        guidance=config.inpaint.guidance,
        region_dilation=0,
    )


class _ReplayDetector:
    """Serves the detection list persisted by the detect stage, so the
    remove-background stage consumes its predecessor's output rather than
    calling the model twice."""

    def __init__(self, doc: list[dict[str, Any]]):
        self._detections = [
            DetectedObject(
                class_label=entry["class"],
                confidence=entry["confidence"],
                bbox=BBox(*entry["bbox"]),
            )
            for entry in doc
        ]

    def detect(self, image: ImageBuffer, min_confidence: float) -> list[DetectedObject]:
        return [d for d in self._detections if d.confidence >= min_confidence]


class _StageWriter:
    """Finalizes stages in plan order, chaining each manifest's inputs to the
    previous stage's output digests."""

    def __init__(self, run: RunHandle):
        self.run = run
        self.prev: dict[str, str] = {}

    def write(
        self,
        stage: str,
        artifacts: list[tuple[str, bytes]],
        *,
        backend_id: str = "",
        params: dict[str, Any] | None = None,
        seed: int = 0,
        first: bool = False,
    ) -> StageManifest:
        inputs = [] if first else sorted(self.prev.items())
        manifest = stage_store.write_stage_output(
            self.run, stage, artifacts,
            backend_id=backend_id, params=params, seed=seed, inputs=inputs,
        )
        self.prev = manifest.output_digests()
        return manifest


def _detections_doc(detections: list[DetectedObject]) -> list[dict[str, Any]]:
    return [
        {"class": d.class_label, "confidence": d.confidence,
         "bbox": [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h]}
        for d in detections
    ]


def _objects_doc(scene: Scene) -> list[dict[str, Any]]:
    return [
        {
            "id": o.id,
            "class": o.class_label,
            "confidence": o.confidence,
            "origin": [o.origin[0], o.origin[1]],
            "z_layer": o.z_layer,
            "scale": o.scale,
            "visible": o.visible,
        }
        for o in scene.objects
    ]


def _scene_artifacts(
    scene: Scene, holes: BinaryMask, plate: ImageBuffer, damage: BinaryMask | None
) -> list[tuple[str, bytes]]:
    artifacts: list[tuple[str, bytes]] = []
    for obj in scene.objects:
        artifacts.append((f"{obj.id}_crop.png", encode_image_png(obj.crop)))
        artifacts.append((f"{obj.id}_mask.png", encode_mask_png(obj.mask)))
    artifacts.append(("background_plate.png", encode_image_png(plate)))
    artifacts.append(("holes.png", encode_mask_png(holes)))
    artifacts.append(("objects.json", json.dumps(_objects_doc(scene), indent=2).encode("utf-8")))
    if damage is not None:
        artifacts.append(("damage.png", encode_mask_png(damage)))
    return artifacts


def run_pipeline(
    config: PipelineConfig,
    input_image: str | Path,
    damage: str | Path | None = None,
    out_root: str | Path | None = None,
    eval_variant: str = "original",
) -> RunResult:
    """Execute the staged pipeline for one image and return the final scene.

    `eval_variant` selects the fixture detection variant; the evaluation
    harness points it at the distorted scores when isolating a distorted
    image. Real HTTP backends ignore it.
    """
    input_image = Path(input_image)
    if not input_image.is_file():
        raise OSError(f"input image not readable: {input_image}")
    image = load_image(input_image)
    damage_mask = load_mask(damage) if damage is not None else None
    if damage_mask is not None and (damage_mask.width, damage_mask.height) != (image.width, image.height):
        raise ValueError(
            f"damage mask is {damage_mask.width}x{damage_mask.height}, "
            f"image is {image.width}x{image.height}"
        )

    plan = resolve_stage_plan(config)
    root = Path(out_root) if out_root is not None else Path(config.run_root)
    root.mkdir(parents=True, exist_ok=True)
    run = stage_store.init_run(root, config, plan, input_name=input_image.name)
    meta = stage_store.RunMeta(
        run_id=run.run_id,
        created=stage_store.load_run_meta(run)["created"],
        config_digest=run.config_digest,
        stage_names=plan.names(),
        input_name=input_image.name,
    )

    writer = _StageWriter(run)
    params = restore_params_from_config(config)
    inpaint_spec = config.backends["inpainter"]
    current = "input"
    try:
        manifests = [_write_input_stage(writer, image, damage_mask)]

        if config.isolation_path == "PATH1":
            current = "detect"
            det_spec = config.backends["detector"]
            detector = make_backend(det_spec, image_name=input_image.name, variant=eval_variant)
            detections = detector.detect(image, 0.0)
            det_doc = _detections_doc(detections)
            det_artifacts = [
                ("input.png", encode_image_png(image)),
                ("detections.json", json.dumps(det_doc, indent=2).encode("utf-8")),
            ]
            if damage_mask is not None:
                det_artifacts.append(("damage.png", encode_mask_png(damage_mask)))
            manifests.append(
                writer.write("detect", det_artifacts, backend_id=det_spec.backend_id,
                             params={"min_confidence": config.min_confidence})
            )

            current = "remove-background"
            rb_spec = config.backends["background_remover"]
            remover = make_backend(rb_spec, image_name=input_image.name)
            scene, report = isolate_path1(image, _ReplayDetector(det_doc), remover, config)
            plate, holes = extract_background(image, scene.objects, hole_dilation=config.morph_radius)
            manifests.append(
                writer.write(
                    "remove-background", _scene_artifacts(scene, holes, plate, damage_mask),
                    backend_id=rb_spec.backend_id,
                    params={"min_confidence": config.min_confidence, "detections": report},
                )
            )
        else:
            current = "segment"
            seg_spec = config.backends["segmenter"]
            segmenter = make_backend(seg_spec, image_name=input_image.name, variant=eval_variant)
            scene, report = isolate_path2(image, segmenter, config)
            plate, holes = extract_background(image, scene.objects, hole_dilation=config.morph_radius)
            manifests.append(
                writer.write(
                    "segment", _scene_artifacts(scene, holes, plate, damage_mask),
                    backend_id=seg_spec.backend_id,
                    params={"min_confidence": config.min_confidence, "detections": report},
                )
            )

        current = "mask-refine"
        scene = refine_masks(scene, config.morph_kind, config.morph_radius)
        plate, holes = extract_background(image, scene.objects, hole_dilation=config.morph_radius)
        manifests.append(
            writer.write(
                "mask-refine", _scene_artifacts(scene, holes, plate, damage_mask),
                backend_id="geometry",
                params={"kind": config.morph_kind, "radius": config.morph_radius},
            )
        )

        current = "restore"
        inpainter = make_backend(inpaint_spec, image_name=input_image.name)
        restored_objects = []
        artifacts: list[tuple[str, bytes]] = []
        for obj in scene.objects:
            damage_crop = None
            if damage_mask is not None:
                box = BBox(x=obj.origin[0], y=obj.origin[1], w=obj.crop.width, h=obj.crop.height)
                damage_crop = crop_mask(damage_mask, box)
            region = restoration_region(obj.mask, damage_crop, params.region_dilation)
            restored = restore_object(obj, damage_crop, inpainter, params)
            restored_objects.append(restored)
            artifacts.append((f"{restored.id}_restored.png", encode_image_png(restored.crop)))
            artifacts.append((f"{restored.id}_region.png", encode_mask_png(region)))
            artifacts.append((f"{restored.id}_mask.png", encode_mask_png(restored.mask)))
        background = restore_background(plate, holes, inpainter, params)
        artifacts.append(("background_restored.png", encode_image_png(background)))
        scene = replace(scene, objects=tuple(restored_objects))
        artifacts.append(("objects.json", json.dumps(_objects_doc(scene), indent=2).encode("utf-8")))
        manifests.append(
            writer.write(
                "restore", artifacts, backend_id=inpaint_spec.backend_id,
                params={
                    "prompt_template": config.inpaint.prompt_template,
                    "steps": config.inpaint.steps,
                    "guidance": config.inpaint.guidance,
                },
                seed=config.inpaint.seed,
            )
        )

        current = "compose"
        scene = replace(scene, background=background)
        composite = render(scene, config.depth_scale_factor)
        compose_artifacts: list[tuple[str, bytes]] = []
        for obj in scene.objects:
            compose_artifacts.append((f"{obj.id}_crop.png", encode_image_png(obj.crop)))
            compose_artifacts.append((f"{obj.id}_mask.png", encode_mask_png(obj.mask)))
        compose_artifacts.append(("background.png", encode_image_png(scene.background)))
        compose_artifacts.append(("composite.png", encode_image_png(composite)))
        compose_artifacts.append(("scene.json", json.dumps(scene_to_dict(scene), indent=2).encode("utf-8")))
        manifests.append(
            writer.write(
                "compose", compose_artifacts, backend_id="compose",
                params={"depth_scale_factor": config.depth_scale_factor},
            )
        )
    except Exception:
        meta.status = f"failed-at-stage:{current}"
        stage_store.write_run_meta(run, meta)
        raise

    meta.status = "completed"
    stage_store.write_run_meta(run, meta)
    return RunResult(run=run, scene=scene, composite=composite, manifests=manifests)


def _write_input_stage(writer: _StageWriter, image: ImageBuffer, damage: BinaryMask | None) -> StageManifest:
    artifacts = [("input.png", encode_image_png(image))]
    if damage is not None:
        artifacts.append(("damage.png", encode_mask_png(damage)))
    return writer.write("input", artifacts, backend_id="io", first=True)


def run_direct(
    config: PipelineConfig,
    input_image: str | Path,
    damage: str | Path,
    out_root: str | Path | None = None,
) -> RunResult:
    """The baseline: one whole-image inpaint over the damage mask, stored
    with the same manifest machinery as a pipeline run."""
    input_image = Path(input_image)
    if not input_image.is_file():
        raise OSError(f"input image not readable: {input_image}")
    image = load_image(input_image)
    damage_mask = load_mask(damage)

    plan = resolve_direct_plan(config)
    root = Path(out_root) if out_root is not None else Path(config.run_root)
    root.mkdir(parents=True, exist_ok=True)
    run = stage_store.init_run(root, config, plan, input_name=input_image.name)
    meta = stage_store.RunMeta(
        run_id=run.run_id,
        created=stage_store.load_run_meta(run)["created"],
        config_digest=run.config_digest,
        stage_names=plan.names(),
        input_name=input_image.name,
    )

    writer = _StageWriter(run)
    current = "input"
    try:
        manifests = [_write_input_stage(writer, image, damage_mask)]
        current = "direct-restore"
        spec = config.backends["inpainter"]
        inpainter = make_backend(spec, image_name=input_image.name)
        composite = direct_restore(image, damage_mask, inpainter, restore_params_from_config(config))
        manifests.append(
            writer.write(
                "direct-restore",
                [("composite.png", encode_image_png(composite))],
                backend_id=spec.backend_id,
                params={
                    "prompt_template": config.inpaint.prompt_template,
                    "steps": config.inpaint.steps,
                    "guidance": config.inpaint.guidance,
                },
                seed=config.inpaint.seed,
            )
        )
    except Exception:
        meta.status = f"failed-at-stage:{current}"
        stage_store.write_run_meta(run, meta)
        raise

    meta.status = "completed"
    stage_store.write_run_meta(run, meta)
    scene = Scene(canvas=(image.width, image.height), background=composite, objects=())
    return RunResult(run=run, scene=scene, composite=composite, manifests=manifests)


# ---------------------------------------------------------------------------
# scene reload + batch edits


def load_scene(run: RunHandle) -> Scene:
    """Rebuild the editable scene from a completed run's compose stage."""
    artifacts, _ = stage_store.load_stage_output(run, "compose")
    doc = json.loads(artifacts["scene.json"].decode("utf-8"))
    background = decode_image_png(artifacts["background.png"])
    crops = {}
    masks = {}
    for entry in doc["objects"]:
        oid = entry["id"]
        crops[oid] = decode_image_png(artifacts[entry["crop"]])
        masks[oid] = decode_mask_png(artifacts[entry["mask"]])
    return scene_from_dict(doc, background, crops, masks)


def _edits_stage_index(run: RunHandle) -> int:
    finalized = [m for m in stage_store.list_manifests(run) if m.stage_name != EDITS_STAGE]
    return max(m.stage_index for m in finalized) + 1


def save_edited_scene(
    run: RunHandle,
    scene: Scene,
    depth_scale_factor: float,
    *,
    applied_edits: list[SceneEdit] | None = None,
) -> tuple[ImageBuffer, StageManifest]:
    """Render the working scene into the rewritable edits stage.

    Finalized pipeline stages are never touched; every save replaces the
    edits stage wholesale with the latest working scene.
    """
    composite = render(scene, depth_scale_factor)
    stage_store.ensure_stage_dir(run, EDITS_STAGE, _edits_stage_index(run))
    artifacts: list[tuple[str, bytes]] = []
    for obj in scene.objects:
        artifacts.append((f"{obj.id}_crop.png", encode_image_png(obj.crop)))
        artifacts.append((f"{obj.id}_mask.png", encode_mask_png(obj.mask)))
    artifacts.append(("background.png", encode_image_png(scene.background)))
    artifacts.append(("composite.png", encode_image_png(composite)))
    artifacts.append(("scene.json", json.dumps(scene_to_dict(scene), indent=2).encode("utf-8")))
    params: dict[str, Any] = {"depth_scale_factor": depth_scale_factor}
    if applied_edits:
        params["edits"] = [edit_to_dict(e) for e in applied_edits]
    compose_manifest = stage_store.load_stage_manifest(run, "compose")
    manifest = stage_store.write_stage_output(
        run, EDITS_STAGE, artifacts,
        backend_id="compose", params=params,
        inputs=list(compose_manifest.outputs), overwrite=True,
    )
    return composite, manifest


def run_edit_script(run_dir: str | Path, script_path: str | Path) -> tuple[ImageBuffer, StageManifest]:
    """CLI `edit`: apply an ordered edit script to a run and re-render."""
    run = stage_store.open_run(run_dir)
    config = run_config(run)
    scene = load_scene(run)
    doc = json.loads(Path(script_path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ValueError("edit script must be a JSON list of edits")
    edits = [edit_from_dict(entry) for entry in doc]
    inpainter = make_backend(config.backends["inpainter"])
    scene = apply_edits(scene, edits, inpainter=inpainter, params=restore_params_from_config(config))
    return save_edited_scene(run, scene, config.depth_scale_factor, applied_edits=edits)


def run_config(run: RunHandle) -> PipelineConfig:
    return parse_config((run.path / CONFIG_FILE_NAME).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# evaluation driver


def _default_regions(detections: list[DetectedObject]) -> list[BBox]:
    # no annotation: distort the upper third of each ground-truth box
    return [
        BBox(x=d.bbox.x, y=d.bbox.y, w=d.bbox.w, h=max(1, d.bbox.h // 3))
        for d in detections
    ]


def _damage_from_regions(regions: list[BBox], width: int, height: int) -> BinaryMask:
    holes = np.zeros((height, width), dtype=bool)
    for box in regions:
        holes[box.y : box.y + box.h, box.x : box.x + box.w] = True
    return BinaryMask.from_array(holes)


def evaluate_dataset(
    config: PipelineConfig,
    dataset_dir: str | Path,
    methods: list[str],
    out_dir: str | Path,
) -> tuple[list[ScoreRecord], Path]:
    """Score every dataset image through the configured restoration methods.

    Per image: measure ground truth, distort, measure the drop, restore via
    each method, measure the recovery. Writes report.json, scatter.csv and
    records.json into `out_dir`.
    """
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = sorted(p for p in dataset_dir.iterdir() if p.suffix.lower() == ".png" and p.is_file())
    if not images:
        raise NotFoundError(f"no PNG images found in {dataset_dir}")
    for method in methods:
        if method not in ("pipeline", "direct"):
            raise ValueError(f"unknown evaluation method {method!r}")

    if config.eval.workers > 1:
        with ThreadPoolExecutor(max_workers=config.eval.workers) as pool:
            records = list(pool.map(lambda p: _evaluate_image(config, p, methods, out_dir), images))
    else:
        records = [_evaluate_image(config, path, methods, out_dir) for path in images]

    report, scatter_csv = export_report(records, methods, config_digest=config_digest(config))
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out_dir / "scatter.csv").write_text(scatter_csv, encoding="utf-8")
    (out_dir / "records.json").write_text(
        json.dumps(records_to_json(records), indent=2) + "\n", encoding="utf-8"
    )
    return records, out_dir


def _evaluate_image(
    config: PipelineConfig, image_path: Path, methods: list[str], out_dir: Path
) -> ScoreRecord:
    image = load_image(image_path)
    detector_spec = config.backends["detector"]

    def detector_for(variant: str):
        return make_backend(detector_spec, image_name=image_path.name, variant=variant)

    ground_truth = detector_for("original").detect(image, 0.0)
    if not ground_truth:
        raise ValueError(f"{image_path.name}: ground-truth detector found nothing to score")

    annotation = _load_distort_annotation(image_path)
    if annotation is not None and "true_class" in annotation:
        true_class = annotation["true_class"]
    else:
        true_class = ground_truth[0].class_label

    if annotation is not None and annotation.get("regions"):
        regions = [BBox(x=r[0], y=r[1], w=r[2], h=r[3]) for r in annotation["regions"]]
    else:
        regions = _default_regions(ground_truth)

    reference_bbox = None
    if config.eval.iou_threshold is not None:
        for det in ground_truth:  # sorted by confidence: first match is the anchor
            if det.class_label == true_class:
                reference_bbox = det.bbox
                break

    def score(img: ImageBuffer, variant: str) -> float:
        return measure(
            img, detector_for(variant), true_class,
            reference_bbox=reference_bbox, iou_threshold=config.eval.iou_threshold,
        )

    g = score(image, "original")

    distorted = image
    for i, region in enumerate(regions):
        distorted = distort(
            distorted, region, config.eval.distort_kind,
            config.eval.distort_seed + i, config.eval.distort_strength,
        )
    d = score(distorted, "distorted")

    work_dir = out_dir / "work" / image_path.stem
    work_dir.mkdir(parents=True, exist_ok=True)
    distorted_path = work_dir / image_path.name
    distorted_path.write_bytes(encode_image_png(distorted))
    damage = _damage_from_regions(regions, image.width, image.height)
    damage_path = work_dir / "damage.png"
    damage_path.write_bytes(encode_mask_png(damage))

    scores: dict[str, float] = {}
    for method in methods:
        run_cfg = replace(config, run_root=str(work_dir / "runs"))
        if method == "pipeline":
            result = run_pipeline(run_cfg, distorted_path, damage=damage_path, eval_variant="distorted")
        else:
            result = run_direct(run_cfg, distorted_path, damage_path)
        scores[method] = score(result.composite, method)

    return ScoreRecord(image_id=image_path.stem, true_class=true_class, g=g, d=d, r=scores)


def _load_distort_annotation(image_path: Path) -> dict[str, Any] | None:
    path = image_path.with_name(f"{image_path.stem}.distort.json")
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
