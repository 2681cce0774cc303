from __future__ import annotations

import json

import pytest

from restorelab.config import (
    config_digest,
    parse_config,
    resolve_stage_plan,
    serialize_config,
)
from restorelab.errors import ConfigParseError, ConfigValidationError

MINIMAL_PATH2 = {
    "isolation_path": "PATH2",
    "backends": {
        "segmenter": {"fixture": "/data/fx"},
        "inpainter": {"fixture": "/data/fx"},
    },
}

MINIMAL_PATH1 = {
    "isolation_path": "PATH1",
    "backends": {
        "detector": {"fixture": "/data/fx"},
        "background_remover": {"fixture": "/data/fx"},
        "inpainter": {"fixture": "/data/fx"},
    },
}


def test_minimal_path2_fills_defaults():
    cfg = parse_config(json.dumps(MINIMAL_PATH2))
    assert cfg.min_confidence == 0.25
    assert cfg.instance_pad == 8
    assert cfg.morph_kind == "dilate"
    assert cfg.morph_radius == 3
    assert cfg.depth_scale_factor == 1.0
    assert cfg.inpaint.seed == 0
    assert cfg.inpaint.prompt_template == "a photo of a {class}"


def test_unknown_key_named_in_error():
    doc = dict(MINIMAL_PATH2, mim_confidence=0.5)
    with pytest.raises(ConfigValidationError, match="mim_confidence"):
        parse_config(json.dumps(doc))


def test_unknown_nested_key_named():
    doc = json.loads(json.dumps(MINIMAL_PATH2))
    doc["inpaint"] = {"sead": 3}
    with pytest.raises(ConfigValidationError, match="inpaint.sead"):
        parse_config(json.dumps(doc))


def test_path1_requires_background_remover():
    doc = json.loads(json.dumps(MINIMAL_PATH1))
    del doc["backends"]["background_remover"]
    with pytest.raises(ConfigValidationError, match="PATH1 requires background_remover"):
        parse_config(json.dumps(doc))


def test_path2_requires_segmenter():
    doc = json.loads(json.dumps(MINIMAL_PATH2))
    del doc["backends"]["segmenter"]
    with pytest.raises(ConfigValidationError, match="PATH2 requires segmenter"):
        parse_config(json.dumps(doc))


def test_inpainter_always_required():
    doc = json.loads(json.dumps(MINIMAL_PATH2))
    del doc["backends"]["inpainter"]
    with pytest.raises(ConfigValidationError, match="inpainter"):
        parse_config(json.dumps(doc))


def test_syntax_error_reports_position():
    with pytest.raises(ConfigParseError, match=r"line \d+"):
        parse_config('{"isolation_path": "PATH2",')


def test_range_validation():
    doc = dict(MINIMAL_PATH2, min_confidence=1.5)
    with pytest.raises(ConfigValidationError):
        parse_config(json.dumps(doc))
    doc = dict(MINIMAL_PATH2, depth_scale_factor=0)
    with pytest.raises(ConfigValidationError):
        parse_config(json.dumps(doc))


def test_backend_spec_shape_validation():
    doc = json.loads(json.dumps(MINIMAL_PATH2))
    doc["backends"]["segmenter"] = {"fixture": "/a", "http": "http://x"}
    with pytest.raises(ConfigValidationError, match="exactly one"):
        parse_config(json.dumps(doc))
    doc["backends"]["segmenter"] = {"fixture": ""}
    with pytest.raises(ConfigValidationError):
        parse_config(json.dumps(doc))


def test_stage_plan_path2():
    cfg = parse_config(json.dumps(MINIMAL_PATH2))
    plan = resolve_stage_plan(cfg)
    assert plan.names() == ["input", "segment", "mask-refine", "restore", "compose"]
    assert [s.index for s in plan.stages] == [0, 1, 2, 3, 4]
    assert plan.stages[0].dir_name == "00_input"


def test_stage_plan_path1():
    cfg = parse_config(json.dumps(MINIMAL_PATH1))
    plan = resolve_stage_plan(cfg)
    assert plan.names() == [
        "input", "detect", "remove-background", "mask-refine", "restore", "compose",
    ]


def test_stage_plan_deterministic():
    cfg = parse_config(json.dumps(MINIMAL_PATH2))
    assert resolve_stage_plan(cfg) == resolve_stage_plan(cfg)


def test_round_trip_is_fixed_point():
    cfg = parse_config(json.dumps(MINIMAL_PATH2))
    text = serialize_config(cfg)
    cfg2 = parse_config(text)
    assert cfg2 == cfg
    assert serialize_config(cfg2) == text


def test_whitespace_insensitive():
    compact = json.dumps(MINIMAL_PATH2, separators=(",", ":"))
    spaced = json.dumps(MINIMAL_PATH2, indent=4)
    assert parse_config(compact) == parse_config(spaced)
    assert config_digest(parse_config(compact)) == config_digest(parse_config(spaced))


def test_backend_id_stable_under_reparse():
    cfg1 = parse_config(json.dumps(MINIMAL_PATH2))
    cfg2 = parse_config(serialize_config(cfg1))
    assert cfg1.backends["segmenter"].backend_id == cfg2.backends["segmenter"].backend_id
