"""Command-line interface.

    restorelab run    --config c.rlab.json --input img.png [--damage m.png] --out runs/
    restorelab direct --config c.rlab.json --input img.png --damage m.png --out runs/
    restorelab edit   --run runs/<id> --script edits.json
    restorelab eval   --config c.rlab.json --dataset data/ --methods pipeline,direct --out eval/
    restorelab stages --run runs/<id>
    restorelab serve  --run runs/<id> --port 8099 [--ui frontend/dist]

RESTORELAB_CONFIG supplies the default --config path.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import stage_store
from .config import CONFIG_ENV_VAR, parse_config
from .errors import RestoreLabError
from .runner import evaluate_dataset, run_direct, run_edit_script, run_pipeline
from .server import serve


def _load_config(path: str | None):
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        raise SystemExit(f"no config given (use --config or {CONFIG_ENV_VAR})")
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"pipeline config file (default: ${CONFIG_ENV_VAR})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restorelab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full restoration pipeline")
    _add_config_arg(p_run)
    p_run.add_argument("--input", required=True, help="input image or directory of images")
    p_run.add_argument("--damage", help="damage mask image or directory matched by stem")
    p_run.add_argument("--out", required=True, help="root directory for run output")

    p_direct = sub.add_parser("direct", help="run the direct whole-image baseline")
    _add_config_arg(p_direct)
    p_direct.add_argument("--input", required=True)
    p_direct.add_argument("--damage", required=True)
    p_direct.add_argument("--out", required=True)

    p_edit = sub.add_parser("edit", help="apply a batch edit script to a run and re-render")
    p_edit.add_argument("--run", required=True)
    p_edit.add_argument("--script", required=True)

    p_eval = sub.add_parser("eval", help="evaluate restoration methods over a dataset")
    _add_config_arg(p_eval)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--methods", default="pipeline,direct")
    p_eval.add_argument("--out", required=True)

    p_stages = sub.add_parser("stages", help="print a run's manifest chain")
    p_stages.add_argument("--run", required=True)

    p_serve = sub.add_parser("serve", help="serve a run to the scene editor UI")
    p_serve.add_argument("--run", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--ui", help="directory with the built UI bundle")

    return parser


def _iter_inputs(input_arg: str, damage_arg: str | None):
    input_path = Path(input_arg)
    if input_path.is_dir():
        damage_dir = Path(damage_arg) if damage_arg else None
        for image in sorted(input_path.glob("*.png")):
            damage = None
            if damage_dir is not None:
                candidate = damage_dir / image.name
                damage = candidate if candidate.exists() else None
            yield image, damage
    else:
        yield input_path, Path(damage_arg) if damage_arg else None


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    for image, damage in _iter_inputs(args.input, args.damage):
        result = run_pipeline(config, image, damage=damage, out_root=args.out)
        print(f"{image.name}: run {result.run.run_id} completed "
              f"({len(result.scene.objects)} objects) -> {result.run.path}")
    return 0


def _cmd_direct(args) -> int:
    config = _load_config(args.config)
    result = run_direct(config, args.input, args.damage, out_root=args.out)
    print(f"direct run {result.run.run_id} completed")
    return 0


def _cmd_edit(args) -> int:
    composite, manifest = run_edit_script(args.run, args.script)
    print(f"edits applied; composite {composite.width}x{composite.height} "
          f"written to stage {manifest.stage_index:02d}_{manifest.stage_name}")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args.config)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    records, out_dir = evaluate_dataset(config, args.dataset, methods, args.out)
    print(f"evaluated {len(records)} images -> {out_dir / 'report.json'}")
    return 0


def _cmd_stages(args) -> int:
    run = stage_store.open_run(args.run)
    for manifest in stage_store.list_manifests(run):
        print(f"{manifest.stage_index:02d} {manifest.stage_name}  backend={manifest.backend_id}")
        for name, digest in manifest.outputs:
            print(f"     out {digest[:12]}  {name}")
        for name, digest in manifest.inputs:
            print(f"     in  {digest[:12]}  {name}")
    return 0


def _cmd_serve(args) -> int:
    serve(args.run, args.port, ui_dir=args.ui)
    return 0


COMMANDS = {
    "run": _cmd_run,
    "direct": _cmd_direct,
    "edit": _cmd_edit,
    "eval": _cmd_eval,
    "stages": _cmd_stages,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RestoreLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
