"""Run the sidecar: `restorelab-sidecar --port 8601 --device cpu`."""
from __future__ import annotations

import argparse

from .config import SidecarConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restorelab-sidecar")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8601)
    parser.add_argument("--device", default="cpu", help="torch device, e.g. cpu or cuda:0")
    parser.add_argument("--detector-model", default=None)
    parser.add_argument("--segmenter-model", default=None)
    parser.add_argument("--inpaint-model", default=None)
    parser.add_argument("--max-image-dim", type=int, default=4096)
    parser.add_argument("--inpaint-workers", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    import uvicorn

    from .service import create_default_app

    args = build_parser().parse_args(argv)
    overrides = {
        "device": args.device,
        "host": args.host,
        "port": args.port,
        "max_image_dim": args.max_image_dim,
        "inpaint_workers": args.inpaint_workers,
    }
    if args.detector_model:
        overrides["detector_model"] = args.detector_model
    if args.segmenter_model:
        overrides["segmenter_model"] = args.segmenter_model
        overrides["background_model"] = args.segmenter_model
    if args.inpaint_model:
        overrides["inpaint_model"] = args.inpaint_model
    config = SidecarConfig(**overrides)
    app = create_default_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
