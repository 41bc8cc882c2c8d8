"""Config schema, orchestration, determinism, plots, CLI."""

import json
import os

import numpy as np
import pytest

from fracext.cli import main as cli_main
from fracext.config import (ConfigError, default_config, load_config, validate)
from fracext.plots import svg_heatmap, svg_loglog
from fracext.runner import run


def test_minimal_config_defaults():
    cfg = validate({"experiment": "harnack"})
    assert cfg.data["problem"]["kappa"] == 0.5
    assert cfg.data["problem"]["family_size"] == 20
    assert cfg.data["setup"]["s"] == 0.5
    assert cfg.seed == 0 and cfg.threads == 1


def test_out_of_range_rejected():
    with pytest.raises(ConfigError, match="setup.s"):
        validate({"experiment": "harnack", "setup": {"s": 1.2}})
    with pytest.raises(ConfigError, match="unknown key"):
        validate({"experiment": "harnack", "problem": {"kappa": 0.5, "bogus": 1}})
    with pytest.raises(ConfigError, match="Lambda"):
        validate({"experiment": "harnack", "setup": {"lambda": 2.0, "Lambda": 1.0}})
    with pytest.raises(ConfigError, match="experiment"):
        validate({"experiment": "nonsense"})
    with pytest.raises(ConfigError, match="t_max"):
        validate({"experiment": "fractional-apply",
                  "problem": {"quadrature": {"t_min": 1.0, "t_max": 0.5}}})


def test_config_roundtrip_canonicalization(tmp_path):
    cfg = validate({"experiment": "geometry-check", "setup": {"s": 0.25},
                    "problem": {"samples": 123}, "seed": 5})
    p = tmp_path / "cfg.json"
    cfg.emit(p)
    cfg2 = load_config(p)
    assert cfg2.canonical_bytes() == cfg.canonical_bytes()
    assert cfg2.config_hash() == cfg.config_hash()


def test_parse_error_reports_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"experiment": "harnack",\n  "setup": }')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def _small_geometry_cfg(seed=0):
    cfg = default_config("geometry-check")
    cfg.data["problem"]["samples"] = 4000
    cfg.data["problem"]["engulfing_samples"] = 800
    cfg.data["seed"] = seed
    return cfg


def test_run_manifest_lists_outputs(tmp_path):
    cfg = _small_geometry_cfg()
    m = run(cfg, str(tmp_path))
    assert m.exit_status == 0
    assert m.stages[0]["status"] == "pass"
    outs = m.stages[0]["outputs"]
    assert any(o.endswith("geometry_report.json") for o in outs)
    for o in outs:
        assert os.path.exists(tmp_path / o)
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["config_hash"] == cfg.config_hash()
    assert data["config"]["problem"]["samples"] == 4000  # defaults echoed


def test_run_schauder_smoke_with_plots(tmp_path):
    cfg = default_config("schauder-decay")
    cfg.data["problem"].update({"benchmark": "polynomial", "case": 2,
                                "mx": 60, "my": 32, "depth": 4})
    cfg.data["emit_plots"] = True
    m = run(cfg, str(tmp_path))
    assert m.stages[0]["status"] == "pass"
    outs = m.stages[0]["outputs"]
    assert any(o.endswith("decay_report.json") for o in outs)
    assert any(o.endswith("decay.svg") for o in outs)


def test_determinism_byte_identical(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        cfg = _small_geometry_cfg(seed=7)
        run(cfg, str(d))
    for name in sorted(os.listdir(d1)):
        b1 = (d1 / name).read_bytes()
        b2 = (d2 / name).read_bytes()
        if name == "manifest.json":
            m1 = json.loads(b1)
            m2 = json.loads(b2)
            for m in (m1, m2):
                m.pop("started"), m.pop("finished")
            assert m1 == m2
        else:
            assert b1 == b2, name


def test_failing_stage_sets_exit_status(tmp_path):
    cfg = default_config("barrier-check")
    cfg.data["setup"]["s"] = 0.75  # case 1 requires s <= 1/2: stage errors
    m = run(cfg, str(tmp_path))
    assert m.exit_status == 1
    assert m.stages[0]["status"] == "error"


def test_svg_empty_ladder_and_reference_slope(tmp_path):
    p = tmp_path / "empty.svg"
    svg_loglog(p, [], [], title="decay")
    text = p.read_text()
    assert "no data" in text and "<svg" in text
    p2 = tmp_path / "decay.svg"
    svg_loglog(p2, [1.0, 0.5, 0.25], [1.0, 0.3, 0.09], ref_slope=1.7,
               meta_comment="config deadbeef")
    t2 = p2.read_text()
    assert "slope 1.7" in t2 and "config deadbeef" in t2
    assert t2.count("<circle") == 3


def test_svg_heatmap(tmp_path):
    p = tmp_path / "heat.svg"
    xs = np.linspace(0, 1, 8)
    zs = np.geomspace(1e-2, 1.0, 6)
    svg_heatmap(p, xs, zs, np.outer(zs, xs), title="state")
    text = p.read_text()
    assert text.count("<rect") > 40  # cells plus colorbar
    # determinism of plot bytes
    p2 = tmp_path / "heat2.svg"
    svg_heatmap(p2, xs, zs, np.outer(zs, xs), title="state")
    assert p.read_bytes() == p2.read_bytes()


def test_cli_subcommand_and_overrides(tmp_path, capsys):
    rc = cli_main(["geometry-check", "--out", str(tmp_path), "--seed", "3",
                   "--s", "0.25"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "[pass] geometry-check" in out
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["config"]["seed"] == 3
    assert data["config"]["setup"]["s"] == 0.25


def test_cli_run_requires_config(capsys):
    assert cli_main(["run"]) == 2
    assert "requires --config" in capsys.readouterr().err


def test_cli_mismatched_kind(tmp_path, capsys):
    cfg = default_config("harnack")
    p = tmp_path / "h.json"
    cfg.emit(p)
    assert cli_main(["geometry-check", "--config", str(p)]) == 2
    assert "not" in capsys.readouterr().err


def test_cli_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACEXT_OUT", str(tmp_path / "envout"))
    cfg = _small_geometry_cfg()
    p = tmp_path / "g.json"
    cfg.emit(p)
    rc = cli_main(["run", "--config", str(p)])
    assert rc == 0
    assert (tmp_path / "envout" / "manifest.json").exists()
