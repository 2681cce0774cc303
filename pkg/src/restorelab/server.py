"""Local HTTP service exposing a completed run to the scene editor UI.

Edits mutate an in-memory working scene guarded by a single lock, so edit
order equals request arrival order. Saves land only in the rewritable edits
stage; finalized pipeline stages are never touched.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from . import stage_store
from .backends import make_backend
from .compose import apply_edit, edit_from_dict, render, scene_to_dict
from .errors import NotFoundError, RestoreLabError
from .pngio import encode_image_png
from .restore import RestoreParams
from .runner import load_scene, restore_params_from_config, run_config, save_edited_scene
from .stage_store import RunHandle


class SceneSession:
    """Owns the working scene for one served run."""

    def __init__(self, run: RunHandle):
        self.run = run
        self.config = run_config(run)
        self.scene = load_scene(run)
        self.lock = threading.Lock()
        self.inpainter = make_backend(self.config.backends["inpainter"])
        self.params: RestoreParams = restore_params_from_config(self.config)

    def scene_doc(self) -> dict[str, Any]:
        with self.lock:
            doc = scene_to_dict(self.scene)
        doc["objects"] = [
            {**entry, "thumbnail": f"/api/image/compose/{entry['crop']}"}
            for entry in doc["objects"]
        ]
        return doc

    def apply(self, edits: list[dict[str, Any]]) -> int:
        parsed = [edit_from_dict(entry) for entry in edits]
        with self.lock:
            scene = self.scene
            for edit in parsed:
                scene = apply_edit(scene, edit, inpainter=self.inpainter, params=self.params)
            self.scene = scene
        return len(parsed)

    def render_and_save(self) -> bytes:
        with self.lock:
            composite, _ = save_edited_scene(self.run, self.scene, self.config.depth_scale_factor)
        return encode_image_png(composite)

    def tune(self, object_id: int, prompt: str) -> None:
        self.apply([{"op": "tune", "object_id": object_id, "prompt": prompt}])


def _make_handler(session: SceneSession, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, payload: Any, status: int = 200) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error_json(self, message: str, status: int) -> None:
            self._send_json({"error": message}, status=status)

        def _send_bytes(self, data: bytes, content_type: str) -> None:
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _read_body(self) -> Any:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return None
            return json.loads(raw.decode("utf-8"))

        def do_GET(self):
            try:
                if self.path == "/api/scene":
                    self._send_json(session.scene_doc())
                elif self.path == "/api/stages":
                    manifests = stage_store.list_manifests(session.run)
                    self._send_json({"stages": [m.to_dict() for m in manifests]})
                elif self.path.startswith("/api/image/"):
                    parts = self.path.split("/")
                    if len(parts) != 5:
                        raise NotFoundError(f"bad image path: {self.path}")
                    _, _, _, stage, name = parts
                    artifacts, _ = stage_store.load_stage_output(session.run, stage)
                    if name not in artifacts:
                        raise NotFoundError(f"stage {stage} has no artifact {name}")
                    self._send_bytes(artifacts[name], "image/png")
                else:
                    self._serve_static()
            except NotFoundError as exc:
                self._send_error_json(str(exc), 404)
            except Exception as exc:
                self._send_error_json(str(exc), 500)

        def do_POST(self):
            try:
                if self.path == "/api/scene/edits":
                    body = self._read_body()
                    if not isinstance(body, list):
                        raise ValueError("body must be a JSON list of edits")
                    applied = session.apply(body)
                    self._send_json({"applied": applied})
                elif self.path == "/api/render":
                    png = session.render_and_save()
                    self._send_bytes(png, "image/png")
                elif self.path.startswith("/api/objects/") and self.path.endswith("/tune"):
                    object_id = int(self.path.split("/")[3])
                    body = self._read_body() or {}
                    prompt = body.get("prompt", "")
                    session.tune(object_id, prompt)
                    self._send_json({"tuned": object_id})
                else:
                    self._send_error_json(f"unknown endpoint {self.path}", 404)
            except NotFoundError as exc:
                self._send_error_json(str(exc), 404)
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_error_json(str(exc), 400)
            except RestoreLabError as exc:
                self._send_error_json(str(exc), 500)
            except Exception as exc:
                self._send_error_json(str(exc), 500)

        def _serve_static(self):
            path = self.path.split("?", 1)[0]
            if path == "/":
                path = "/index.html"
            if ui_dir is None:
                if path == "/index.html":
                    self._send_bytes(
                        b"<html><body><p>restorelab serve is running; "
                        b"no UI bundle configured (use --ui).</p></body></html>",
                        "text/html",
                    )
                    return
                raise NotFoundError(f"no static file {path}")
            target = (ui_dir / path.lstrip("/")).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                raise NotFoundError(f"no static file {path}")
            types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                     ".png": "image/png", ".svg": "image/svg+xml", ".map": "application/json"}
            self._send_bytes(target.read_bytes(), types.get(target.suffix, "application/octet-stream"))

    return Handler


def make_server(run_dir: str | Path, port: int, ui_dir: str | Path | None = None) -> ThreadingHTTPServer:
    """Build the HTTP server for a completed run (bind only; call
    serve_forever() to run)."""
    run = stage_store.open_run(Path(run_dir))
    session = SceneSession(run)
    ui = Path(ui_dir) if ui_dir is not None else None
    try:
        return ThreadingHTTPServer(("127.0.0.1", port), _make_handler(session, ui))
    except OSError as exc:
        raise OSError(f"cannot bind port {port}: {exc}") from exc


def serve(run_dir: str | Path, port: int, ui_dir: str | Path | None = None) -> None:
    server = make_server(run_dir, port, ui_dir)
    host, bound_port = server.server_address[:2]
    print(f"restorelab serve: http://{host}:{bound_port}/ (run {run_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
