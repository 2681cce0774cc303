"""Sidecar configuration: which model serves which endpoint."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_DETECTOR_MODEL = "yolov8n.pt"
DEFAULT_SEGMENTER_MODEL = "yolov8n-seg.pt"
DEFAULT_INPAINT_MODEL = "runwayml/stable-diffusion-inpainting"

SCHEMA_DIR_ENV = "RESTORELAB_SCHEMAS"


def default_schema_dir() -> Path:
    """Shared schema directory: env override, else `schemas/` at the repo root."""
    override = os.environ.get(SCHEMA_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parents[3] / "schemas"


@dataclass
class SidecarConfig:
    detector_model: str | None = DEFAULT_DETECTOR_MODEL
    segmenter_model: str | None = DEFAULT_SEGMENTER_MODEL
    background_model: str | None = DEFAULT_SEGMENTER_MODEL
    inpaint_model: str | None = DEFAULT_INPAINT_MODEL
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8601
    max_image_dim: int = 4096
    inpaint_workers: int = 1
    schema_dir: Path = field(default_factory=default_schema_dir)

    def __post_init__(self):
        if self.max_image_dim < 1:
            raise ValueError("max_image_dim must be >= 1")
        if self.inpaint_workers < 1:
            raise ValueError("inpaint_workers must be >= 1")

    def configured_roles(self) -> set[str]:
        roles = set()
        if self.detector_model:
            roles.add("detect")
        if self.segmenter_model:
            roles.add("segment")
        if self.background_model:
            roles.add("remove_background")
        if self.inpaint_model:
            roles.add("inpaint")
        return roles
