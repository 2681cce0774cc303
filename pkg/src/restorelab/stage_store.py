"""Directory-based run storage.

Each run gets its own directory with one numbered subdirectory per stage.
A stage is written once: its artifacts land next to a `manifest.json` whose
content digests make the whole run verifiable and replayable.
"""
from __future__ import annotations

import hashlib
import json
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .config import CONFIG_FILE_NAME, PipelineConfig, StagePlan, config_digest, serialize_config
from .errors import IntegrityError, NotFoundError, StoreConflictError

MANIFEST_NAME = "manifest.json"
RUN_META_NAME = "run.json"


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class RunHandle:
    run_id: str
    root: Path
    config_digest: str

    @property
    def path(self) -> Path:
        return self.root / self.run_id


@dataclass(frozen=True)
class StageManifest:
    stage_name: str
    stage_index: int
    backend_id: str
    params: dict[str, Any]
    seed: int
    inputs: tuple[tuple[str, str], ...]
    outputs: tuple[tuple[str, str], ...]
    started: str
    finished: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage_name": self.stage_name,
            "stage_index": self.stage_index,
            "backend_id": self.backend_id,
            "params": self.params,
            "seed": self.seed,
            "inputs": [list(pair) for pair in self.inputs],
            "outputs": [list(pair) for pair in self.outputs],
            "started": self.started,
            "finished": self.finished,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "StageManifest":
        return cls(
            stage_name=doc["stage_name"],
            stage_index=doc["stage_index"],
            backend_id=doc["backend_id"],
            params=doc["params"],
            seed=doc["seed"],
            inputs=tuple((p, d) for p, d in doc["inputs"]),
            outputs=tuple((p, d) for p, d in doc["outputs"]),
            started=doc["started"],
            finished=doc["finished"],
        )

    def output_digests(self) -> dict[str, str]:
        return dict(self.outputs)


@dataclass
class RunMeta:
    run_id: str
    created: str
    config_digest: str
    stage_names: list[str]
    status: str = "running"
    input_name: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "created": self.created,
            "config_digest": self.config_digest,
            "stages": self.stage_names,
            "status": self.status,
            "input": self.input_name,
            **self.extra,
        }


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def init_run(root: str | Path, config: PipelineConfig, plan: StagePlan, input_name: str = "") -> RunHandle:
    """Create `<root>/<run_id>/` with the plan's numbered stage directories."""
    root = Path(root)
    if not root.exists():
        raise OSError(f"run root does not exist: {root}")
    digest = config_digest(config)
    for _ in range(16):
        run_id = time.strftime("%Y%m%d-%H%M%S", time.gmtime()) + "-" + secrets.token_hex(3)
        run_dir = root / run_id
        try:
            run_dir.mkdir()
        except FileExistsError:
            continue  # collision: retry with a fresh suffix
        break
    else:
        raise OSError(f"could not allocate a unique run id under {root}")

    for stage in plan.stages:
        (run_dir / stage.dir_name).mkdir()
    (run_dir / CONFIG_FILE_NAME).write_text(serialize_config(config), encoding="utf-8")
    handle = RunHandle(run_id=run_id, root=root, config_digest=digest)
    meta = RunMeta(
        run_id=run_id,
        created=_utc_now(),
        config_digest=digest,
        stage_names=plan.names(),
        input_name=input_name,
    )
    write_run_meta(handle, meta)
    return handle


def write_run_meta(run: RunHandle, meta: RunMeta) -> None:
    (run.path / RUN_META_NAME).write_text(
        json.dumps(meta.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def load_run_meta(run: RunHandle) -> dict[str, Any]:
    path = run.path / RUN_META_NAME
    if not path.exists():
        raise NotFoundError(f"run metadata not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def open_run(run_dir: str | Path) -> RunHandle:
    """Attach to an existing run directory."""
    run_dir = Path(run_dir)
    meta_path = run_dir / RUN_META_NAME
    if not meta_path.exists():
        raise NotFoundError(f"not a run directory (no {RUN_META_NAME}): {run_dir}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return RunHandle(run_id=meta["run_id"], root=run_dir.parent, config_digest=meta["config_digest"])


def stage_dir(run: RunHandle, stage_name: str) -> Path:
    """Resolve a stage's directory by its `NN_<stage>` prefix convention."""
    for child in sorted(run.path.iterdir()):
        if child.is_dir() and child.name.split("_", 1)[-1] == stage_name:
            return child
    raise NotFoundError(f"run {run.run_id} has no stage {stage_name!r}")


def ensure_stage_dir(run: RunHandle, stage_name: str, stage_index: int) -> Path:
    """Create a stage directory after the fact (used for the edits stage)."""
    path = run.path / f"{stage_index:02d}_{stage_name}"
    path.mkdir(exist_ok=True)
    return path


def write_stage_output(
    run: RunHandle,
    stage_name: str,
    artifacts: Sequence[tuple[str, bytes]],
    *,
    backend_id: str = "",
    params: dict[str, Any] | None = None,
    seed: int = 0,
    inputs: Sequence[tuple[str, str]] = (),
    overwrite: bool = False,
) -> StageManifest:
    """Write a stage's artifacts and finalize it with a manifest.

    A finalized stage is append-only; a second write raises unless
    `overwrite` is set (reserved for the interactive edits stage).
    """
    sdir = stage_dir(run, stage_name)
    manifest_path = sdir / MANIFEST_NAME
    if manifest_path.exists() and not overwrite:
        raise StoreConflictError(f"stage {stage_name!r} of run {run.run_id} is already finalized")

    started = _utc_now()
    outputs = []
    for name, data in artifacts:
        target = sdir / name
        if target.parent != sdir:
            raise ValueError(f"artifact name {name!r} must not contain path separators")
        target.write_bytes(data)
        outputs.append((name, content_digest(data)))

    index = int(sdir.name.split("_", 1)[0])
    manifest = StageManifest(
        stage_name=stage_name,
        stage_index=index,
        backend_id=backend_id,
        params=params or {},
        seed=seed,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        started=started,
        finished=_utc_now(),
    )
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return manifest


def load_stage_manifest(run: RunHandle, stage_name: str) -> StageManifest:
    sdir = stage_dir(run, stage_name)
    manifest_path = sdir / MANIFEST_NAME
    if not manifest_path.exists():
        raise NotFoundError(f"stage {stage_name!r} of run {run.run_id} has no manifest")
    return StageManifest.from_dict(json.loads(manifest_path.read_text(encoding="utf-8")))


def load_stage_output(run: RunHandle, stage_name: str) -> tuple[dict[str, bytes], StageManifest]:
    """Read a finalized stage back, verifying every artifact digest."""
    manifest = load_stage_manifest(run, stage_name)
    sdir = stage_dir(run, stage_name)
    artifacts = {}
    for name, digest in manifest.outputs:
        path = sdir / name
        if not path.exists():
            raise IntegrityError(f"artifact {name} of stage {stage_name!r} is missing")
        data = path.read_bytes()
        actual = content_digest(data)
        if actual != digest:
            raise IntegrityError(
                f"artifact {name} of stage {stage_name!r} is corrupt: "
                f"digest {actual} != recorded {digest}"
            )
        artifacts[name] = data
    return artifacts, manifest


def list_manifests(run: RunHandle) -> list[StageManifest]:
    """All finalized stage manifests, ordered by stage index."""
    manifests = []
    for child in sorted(run.path.iterdir()):
        if child.is_dir() and (child / MANIFEST_NAME).exists():
            manifests.append(
                StageManifest.from_dict(json.loads((child / MANIFEST_NAME).read_text(encoding="utf-8")))
            )
    manifests.sort(key=lambda m: m.stage_index)
    return manifests
