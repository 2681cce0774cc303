"""Pipeline configuration: parse the user's dictionary file, validate it
strictly, fill documented defaults, and resolve the ordered stage plan.

Documents use JSON grammar; the conventional file extension is `.rlab.json`.
Unknown keys are rejected so that a typo can never silently change a run.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from .backends import ROLES, BackendSpec
from .errors import ConfigParseError, ConfigValidationError
from .geometry import MORPH_KINDS

PATHS = ("PATH1", "PATH2")
DISTORT_KINDS = ("blackout", "gaussian_blur", "noise")

DEFAULT_MIN_CONFIDENCE = 0.25
DEFAULT_INSTANCE_PAD = 8
DEFAULT_MORPH_KIND = "dilate"
DEFAULT_MORPH_RADIUS = 3
DEFAULT_DEPTH_SCALE_FACTOR = 1.0
DEFAULT_PROMPT_TEMPLATE = "a photo of a {class}"
DEFAULT_SEED = 0
DEFAULT_STEPS = 20
DEFAULT_GUIDANCE = 7.5

CONFIG_FILE_NAME = "config.rlab.json"
CONFIG_ENV_VAR = "RESTORELAB_CONFIG"


@dataclass(frozen=True)
class InpaintSettings:
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    seed: int = DEFAULT_SEED
    steps: int = DEFAULT_STEPS
    guidance: float = DEFAULT_GUIDANCE

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigValidationError("inpaint.seed must be >= 0")
        if self.steps < 1:
            raise ConfigValidationError("inpaint.steps must be >= 1")
        if self.guidance < 0:
            raise ConfigValidationError("inpaint.guidance must be >= 0")


@dataclass(frozen=True)
class EvalSettings:
    distort_kind: str = "blackout"
    distort_strength: float = 8.0
    distort_seed: int = 0
    iou_threshold: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.distort_kind not in DISTORT_KINDS:
            raise ConfigValidationError(
                f"eval.distortion.kind must be one of {DISTORT_KINDS}, got {self.distort_kind!r}"
            )
        if self.workers < 1:
            raise ConfigValidationError("eval.workers must be >= 1")
        if self.iou_threshold is not None and not 0.0 <= self.iou_threshold <= 1.0:
            raise ConfigValidationError("eval.iou_threshold must be in [0,1]")


@dataclass(frozen=True)
class PipelineConfig:
    isolation_path: str
    backends: dict[str, BackendSpec]
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    instance_pad: int = DEFAULT_INSTANCE_PAD
    morph_kind: str = DEFAULT_MORPH_KIND
    morph_radius: int = DEFAULT_MORPH_RADIUS
    inpaint: InpaintSettings = field(default_factory=InpaintSettings)
    depth_scale_factor: float = DEFAULT_DEPTH_SCALE_FACTOR
    eval: EvalSettings = field(default_factory=EvalSettings)
    run_root: str = "runs"

    def __post_init__(self):
        if self.isolation_path not in PATHS:
            raise ConfigValidationError(
                f"isolation_path must be PATH1 or PATH2, got {self.isolation_path!r}"
            )
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ConfigValidationError("min_confidence must be in [0,1]")
        if self.instance_pad < 0:
            raise ConfigValidationError("instance_pad must be >= 0")
        if self.morph_kind not in MORPH_KINDS:
            raise ConfigValidationError(
                f"morph.kind must be one of {MORPH_KINDS}, got {self.morph_kind!r}"
            )
        if self.morph_radius < 1:
            raise ConfigValidationError("morph.radius must be >= 1")
        if self.depth_scale_factor <= 0:
            raise ConfigValidationError("depth_scale_factor must be > 0")
        if "inpainter" not in self.backends:
            raise ConfigValidationError("backends requires inpainter")
        if self.isolation_path == "PATH1":
            for role in ("detector", "background_remover"):
                if role not in self.backends:
                    raise ConfigValidationError(f"PATH1 requires {role}")
        else:
            if "segmenter" not in self.backends:
                raise ConfigValidationError("PATH2 requires segmenter")
        for role, spec in self.backends.items():
            if spec.role != role:
                raise ConfigValidationError(
                    f"backend listed under {role!r} declares role {spec.role!r}"
                )


@dataclass(frozen=True)
class StageRef:
    name: str
    index: int

    @property
    def dir_name(self) -> str:
        return f"{self.index:02d}_{self.name}"


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[StageRef, ...]

    def __post_init__(self):
        for i, stage in enumerate(self.stages):
            if stage.index != i:
                raise ConfigValidationError("stage indices must start at 0 and increase by 1")

    def names(self) -> list[str]:
        return [s.name for s in self.stages]

    def stage(self, name: str) -> StageRef:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


PATH1_STAGES = ("input", "detect", "remove-background", "mask-refine", "restore", "compose")
PATH2_STAGES = ("input", "segment", "mask-refine", "restore", "compose")
DIRECT_STAGES = ("input", "direct-restore")
EDITS_STAGE = "edits"


def resolve_stage_plan(config: PipelineConfig) -> StagePlan:
    names = PATH1_STAGES if config.isolation_path == "PATH1" else PATH2_STAGES
    return StagePlan(tuple(StageRef(name=n, index=i) for i, n in enumerate(names)))


def resolve_direct_plan(config: PipelineConfig) -> StagePlan:
    return StagePlan(tuple(StageRef(name=n, index=i) for i, n in enumerate(DIRECT_STAGES)))


# ---------------------------------------------------------------------------
# parsing


def parse_config(text: str) -> PipelineConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise ConfigValidationError("configuration document must be a JSON object")
    return config_from_dict(doc)


def config_from_dict(doc: dict[str, Any]) -> PipelineConfig:
    top_keys = {
        "isolation_path",
        "backends",
        "min_confidence",
        "instance_pad",
        "morph",
        "inpaint",
        "depth_scale_factor",
        "eval",
        "run_root",
    }
    _reject_unknown(doc, top_keys, "")

    if "isolation_path" not in doc:
        raise ConfigValidationError("isolation_path is required")
    if "backends" not in doc:
        raise ConfigValidationError("backends is required")

    backends = _parse_backends(_expect(doc, "backends", dict))

    morph_doc = _expect(doc, "morph", dict, default={})
    _reject_unknown(morph_doc, {"kind", "radius"}, "morph.")
    inpaint_doc = _expect(doc, "inpaint", dict, default={})
    _reject_unknown(inpaint_doc, {"prompt_template", "seed", "steps", "guidance"}, "inpaint.")
    eval_doc = _expect(doc, "eval", dict, default={})
    _reject_unknown(eval_doc, {"distortion", "iou_threshold", "workers"}, "eval.")
    distortion_doc = _expect(eval_doc, "distortion", dict, default={})
    _reject_unknown(distortion_doc, {"kind", "strength", "seed"}, "eval.distortion.")

    return PipelineConfig(
        isolation_path=_expect(doc, "isolation_path", str),
        backends=backends,
        min_confidence=float(_expect_number(doc, "min_confidence", DEFAULT_MIN_CONFIDENCE)),
        instance_pad=_expect_int(doc, "instance_pad", DEFAULT_INSTANCE_PAD),
        morph_kind=_expect(morph_doc, "kind", str, default=DEFAULT_MORPH_KIND),
        morph_radius=_expect_int(morph_doc, "radius", DEFAULT_MORPH_RADIUS),
        inpaint=InpaintSettings(
            prompt_template=_expect(inpaint_doc, "prompt_template", str, default=DEFAULT_PROMPT_TEMPLATE),
            seed=_expect_int(inpaint_doc, "seed", DEFAULT_SEED),
            steps=_expect_int(inpaint_doc, "steps", DEFAULT_STEPS),
            guidance=float(_expect_number(inpaint_doc, "guidance", DEFAULT_GUIDANCE)),
        ),
        depth_scale_factor=float(_expect_number(doc, "depth_scale_factor", DEFAULT_DEPTH_SCALE_FACTOR)),
        eval=EvalSettings(
            distort_kind=_expect(distortion_doc, "kind", str, default="blackout"),
            distort_strength=float(_expect_number(distortion_doc, "strength", 8.0)),
            distort_seed=_expect_int(distortion_doc, "seed", 0),
            iou_threshold=_parse_optional_number(eval_doc, "iou_threshold"),
            workers=_expect_int(eval_doc, "workers", 1),
        ),
        run_root=_expect(doc, "run_root", str, default="runs"),
    )


def _parse_backends(doc: dict[str, Any]) -> dict[str, BackendSpec]:
    _reject_unknown(doc, set(ROLES), "backends.")
    specs = {}
    for role, spec_doc in doc.items():
        if not isinstance(spec_doc, dict):
            raise ConfigValidationError(f"backends.{role} must be an object")
        _reject_unknown(spec_doc, {"fixture", "http"}, f"backends.{role}.")
        if len(spec_doc) != 1:
            raise ConfigValidationError(
                f"backends.{role} must contain exactly one of 'fixture' or 'http'"
            )
        kind, locator = next(iter(spec_doc.items()))
        if not isinstance(locator, str) or not locator:
            raise ConfigValidationError(f"backends.{role}.{kind} must be a non-empty string")
        specs[role] = BackendSpec(role=role, kind=kind, locator=locator)
    return specs


def _reject_unknown(doc: dict[str, Any], allowed: set[str], prefix: str) -> None:
    unknown = [k for k in doc if k not in allowed]
    if unknown:
        raise ConfigValidationError(f"unknown key '{prefix}{unknown[0]}'")


def _expect(doc: dict[str, Any], key: str, typ: type, default: Any = ...) -> Any:
    if key not in doc:
        if default is ...:
            raise ConfigValidationError(f"{key} is required")
        return default
    value = doc[key]
    if not isinstance(value, typ) or isinstance(value, bool):
        raise ConfigValidationError(f"{key} must be of type {typ.__name__}")
    return value


def _expect_number(doc: dict[str, Any], key: str, default: float) -> float:
    if key not in doc:
        return default
    value = doc[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigValidationError(f"{key} must be a number")
    return value


def _expect_int(doc: dict[str, Any], key: str, default: int) -> int:
    if key not in doc:
        return default
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigValidationError(f"{key} must be an integer")
    return value


def _parse_optional_number(doc: dict[str, Any], key: str) -> float | None:
    if key not in doc or doc[key] is None:
        return None
    value = doc[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigValidationError(f"{key} must be a number or null")
    return float(value)


# ---------------------------------------------------------------------------
# serialization


def config_to_dict(config: PipelineConfig) -> dict[str, Any]:
    return {
        "isolation_path": config.isolation_path,
        "backends": {
            role: {spec.kind: spec.locator} for role, spec in sorted(config.backends.items())
        },
        "min_confidence": config.min_confidence,
        "instance_pad": config.instance_pad,
        "morph": {"kind": config.morph_kind, "radius": config.morph_radius},
        "inpaint": {
            "prompt_template": config.inpaint.prompt_template,
            "seed": config.inpaint.seed,
            "steps": config.inpaint.steps,
            "guidance": config.inpaint.guidance,
        },
        "depth_scale_factor": config.depth_scale_factor,
        "eval": {
            "distortion": {
                "kind": config.eval.distort_kind,
                "strength": config.eval.distort_strength,
                "seed": config.eval.distort_seed,
            },
            "iou_threshold": config.eval.iou_threshold,
            "workers": config.eval.workers,
        },
        "run_root": config.run_root,
    }


def serialize_config(config: PipelineConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def config_digest(config: PipelineConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()
