from __future__ import annotations

import json

import pytest

from conftest import fixture_config_doc, rect_mask, write_fixture_image
from restorelab.cli import main
from restorelab.config import serialize_config, parse_config
from restorelab.geometry import BBox
from restorelab.pngio import save_mask


@pytest.fixture
def workspace(fixture_dir, tmp_path):
    write_fixture_image(
        fixture_dir, "img", (64, 64),
        [{"class": "zebra", "confidence": 0.9, "bbox": BBox(10, 10, 20, 20)}],
    )
    config_path = tmp_path / "pipeline.rlab.json"
    config = parse_config(json.dumps(fixture_config_doc(fixture_dir, "PATH2")))
    config_path.write_text(serialize_config(config))
    out = tmp_path / "out"
    out.mkdir()
    return fixture_dir, config_path, out


def test_run_and_stages(workspace, capsys):
    fixture_dir, config_path, out = workspace
    rc = main(["run", "--config", str(config_path),
               "--input", str(fixture_dir / "img.png"), "--out", str(out)])
    assert rc == 0
    assert "completed" in capsys.readouterr().out

    run_dir = next(p for p in out.iterdir() if p.is_dir())
    rc = main(["stages", "--run", str(run_dir)])
    assert rc == 0
    printed = capsys.readouterr().out
    for stage in ("00 input", "01 segment", "04 compose"):
        assert stage in printed


def test_run_directory_input(workspace, capsys):
    fixture_dir, config_path, out = workspace
    write_fixture_image(
        fixture_dir, "img2", (64, 64),
        [{"class": "cat", "confidence": 0.8, "bbox": BBox(20, 20, 16, 16)}],
    )
    rc = main(["run", "--config", str(config_path), "--input", str(fixture_dir),
               "--out", str(out)])
    assert rc == 0
    assert len([p for p in out.iterdir() if p.is_dir()]) == 2


def test_direct_requires_damage_and_runs(workspace, tmp_path, capsys):
    fixture_dir, config_path, out = workspace
    damage = tmp_path / "damage.png"
    save_mask(damage, rect_mask(64, 64, BBox(12, 12, 8, 8)))
    rc = main(["direct", "--config", str(config_path),
               "--input", str(fixture_dir / "img.png"),
               "--damage", str(damage), "--out", str(out)])
    assert rc == 0
    assert "direct run" in capsys.readouterr().out


def test_edit_command(workspace, tmp_path, capsys):
    fixture_dir, config_path, out = workspace
    main(["run", "--config", str(config_path),
          "--input", str(fixture_dir / "img.png"), "--out", str(out)])
    capsys.readouterr()
    run_dir = next(p for p in out.iterdir() if p.is_dir())
    script = tmp_path / "edits.json"
    script.write_text(json.dumps([{"op": "move", "object_id": 0, "dx": 4}]))
    rc = main(["edit", "--run", str(run_dir), "--script", str(script)])
    assert rc == 0
    assert "05_edits" in capsys.readouterr().out


def test_eval_command(fixture_dir, tmp_path, capsys):
    write_fixture_image(
        fixture_dir, "e1", (64, 64),
        [{"class": "zebra", "confidence": 0.9, "bbox": BBox(16, 16, 24, 24)}],
        variants={
            "distorted": [{"class": "zebra", "confidence": 0.7, "bbox": BBox(16, 16, 24, 24)}],
            "pipeline": [{"class": "zebra", "confidence": 0.8, "bbox": BBox(16, 16, 24, 24)}],
            "direct": [{"class": "zebra", "confidence": 0.75, "bbox": BBox(16, 16, 24, 24)}],
        },
    )
    config_path = tmp_path / "c.rlab.json"
    config_path.write_text(serialize_config(parse_config(json.dumps(fixture_config_doc(fixture_dir)))))
    out = tmp_path / "eval-out"
    rc = main(["eval", "--config", str(config_path), "--dataset", str(fixture_dir),
               "--methods", "pipeline,direct", "--out", str(out)])
    assert rc == 0
    assert (out / "report.json").exists()
    assert (out / "scatter.csv").exists()
    assert (out / "records.json").exists()


def test_config_from_environment(workspace, capsys, monkeypatch):
    fixture_dir, config_path, out = workspace
    monkeypatch.setenv("RESTORELAB_CONFIG", str(config_path))
    rc = main(["run", "--input", str(fixture_dir / "img.png"), "--out", str(out)])
    assert rc == 0


def test_error_paths_return_nonzero(workspace, tmp_path, capsys):
    fixture_dir, config_path, out = workspace
    rc = main(["run", "--config", str(config_path),
               "--input", str(tmp_path / "missing.png"), "--out", str(out)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err

    bad_config = tmp_path / "bad.rlab.json"
    bad_config.write_text("{nope")
    rc = main(["run", "--config", str(bad_config),
               "--input", str(fixture_dir / "img.png"), "--out", str(out)])
    assert rc == 1
