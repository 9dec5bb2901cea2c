import json

import pytest

from twistlab import harness
from twistlab.harness import (CSV_HEADER, ConfigError, ExperimentReport, load_config, make_config,
                              parse_config_text, parse_report_json, report_csv, report_json, run_experiment)


def test_defaults_and_lists():
    cfg = make_config("E6", {"p": "1, 0.5, 1/4", "radii": "1,0.5"})
    assert cfg.p == (1.0, 0.5, 0.25) and cfg.radii == (1.0, 0.5)
    assert cfg.M == 256 and cfg.sigma == 8.0
    assert make_config("E5").j == (6, 7, 8, 9)


@pytest.mark.parametrize("values", [{"bogus": "1"}, {"M": "100"}, {"p": "1.5"}, {"n": "2"},
                                    {"threshold.C99.x": "1"}, {"workers": "0"}, {"figures": "maybe"},
                                    {"L": "abc"}])
def test_config_errors(values):
    with pytest.raises(ConfigError):
        make_config("E1", values)


def test_unknown_experiment():
    with pytest.raises(ConfigError, match="unknown experiment"):
        make_config("E11")


def test_threshold_tightening_and_loosening():
    assert make_config("E1", {"threshold.C02.parseval_rel": "1e-6"}).threshold("C02.parseval_rel") == (1e-6, "<")
    with pytest.raises(ConfigError, match="loosens"):
        make_config("E1", {"threshold.C02.parseval_rel": "1e-1"})
    cfg = make_config("E1", {"threshold.C02.parseval_rel": "1e-1", "allow_loosen": "true"})
    assert cfg.threshold("C02.parseval_rel")[0] == 0.1
    with pytest.raises(ConfigError):
        make_config("E1", {"threshold.C03.speedup_M64": "2"})


def test_config_file(tmp_path):
    p = tmp_path / "e.cfg"
    p.write_text("# comment\nexperiment = E3\nM = 64   # inline\nseed = 7\n", encoding="utf-8")
    cfg = load_config(p, overrides={"seed": "9"})
    assert (cfg.experiment, cfg.M, cfg.seed) == ("E3", 64, 9)
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("M = 64\nwhat = 1\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("no equals sign\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg", "E1")


def test_header_only_csv():
    assert report_csv(None) == ",".join(CSV_HEADER) + "\n"


def _fake(cfg, ctx):
    return {"parseval_rel": 1e-5, "runtime_s": 0.5}, {"note": 3}, {"s": {"header": ["a", "b"], "rows": [[1.0, 2.0]]}}


def _boom(cfg, ctx):
    raise RuntimeError("module exploded")


@pytest.fixture
def fake_registry(monkeypatch):
    monkeypatch.setitem(harness.REGISTRY, "E1", (("C02", _fake), ("C03", _boom)))


def test_run_records_errors(fake_registry):
    rep = run_experiment(make_config("E1"))
    assert rep.criteria["C02"].passed
    assert not rep.criteria["C03"].passed and "module exploded" in rep.criteria["C03"].error
    assert not rep.passed
    assert "C03.traceback" in rep.measured and rep.measured["C02.note"] == 3
    rows = report_csv(rep).splitlines()
    assert rows[0] == ",".join(CSV_HEADER)
    assert "E1,C03.error,nan,nan,false" in rows
    assert "E1,C02.parseval_rel,1.000000e-05,1.000000e-03,true" in rows


def test_report_roundtrip_and_determinism(fake_registry, tmp_path):
    rep = run_experiment(make_config("E1"))
    back = parse_report_json(report_json(rep))
    assert back == rep and isinstance(back, ExperimentReport)
    assert report_csv(rep) == report_csv(back)
    harness.emit_report(rep, "json", tmp_path / "r.json")
    harness.emit_report(rep, "csv", tmp_path / "r.csv")
    assert json.loads((tmp_path / "r.json").read_text())["id"] == "E1"
    assert (tmp_path / "E1_s.csv").read_text().splitlines() == ["a,b", "1.000000e+00,2.000000e+00"]
    with pytest.raises(ValueError):
        harness.emit_report(rep, "xml", tmp_path / "r.xml")


def test_registry_covers_all_criteria():
    assert sorted(harness.CRITERION_EXPERIMENT) == [f"C{i:02d}" for i in range(1, 16)]
    names = {k.split(".")[0] for k in harness.THRESHOLDS}
    assert names == set(harness.CRITERION_EXPERIMENT)
