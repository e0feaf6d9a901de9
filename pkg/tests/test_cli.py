import json

import jsonschema
import pytest

from conftest import FIXTURES, run_stages, write_config
from breachlens.cli import main
from breachlens.cli.artifacts import LOCK_NAME, read_csv
from breachlens.cli.config import load_config
from breachlens.cli.report import report_schema
from breachlens.errors import ConfigError

MANIFEST = json.loads((FIXTURES / "manifest.json").read_text())


def lines(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def test_twenty_row_fixture_matches_manifest(tmp_path):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"))
    assert run_stages(cfg, ["ingest", "engineer"]) == [0, 0]
    man = MANIFEST["fixtures"]["incidents_20.csv"]
    rep = json.loads((tmp_path / "out" / "ingest_report.json").read_text())
    assert rep == {"input_count": 20, "retained_count": man["retained_count"], "dropped": man["dropped"]}
    kept = [r for r in man["rows"] if r["retained"]]
    rows = lines(tmp_path / "out" / "engineered.jsonl")
    assert [r["incident_id"] for r in rows] == [r["incident_id"] for r in kept]
    for got, want in zip(rows, kept):
        for key in ("keyword_count", "risk_terms_score", "contains_pii_terms", "year", "incident_month",
                    "is_holiday_month"):
            assert got[key] == want[key], (want["incident_id"], key)
        assert got["threat_enrichment_score"] == got["keyword_count"] + got["risk_terms_score"]


def test_fixture_generator_is_reproducible(tmp_path):
    import importlib.util
    spec = importlib.util.spec_from_file_location("generate", FIXTURES / "generate.py")
    gen = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(gen)
    gen.main(tmp_path)
    for name in ("incidents_20.csv", "incidents_400.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (FIXTURES / name).read_bytes()


def test_exit_codes_for_inputs(tmp_path):
    cfg = write_config(tmp_path, input_path="nope.csv")
    assert main(["ingest", "--config", str(cfg)]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_bytes(b"a,b\n1,2,3\n")
    cfg = write_config(tmp_path, input_path="bad.csv")
    assert main(["ingest", "--config", str(cfg)]) == 2
    empty = tmp_path / "empty.csv"
    empty.write_bytes(b"incident_id,action,year\n")
    cfg = write_config(tmp_path, input_path="empty.csv")
    assert main(["ingest", "--config", str(cfg)]) == 0
    assert json.loads((tmp_path / "out" / "ingest_report.json").read_text())["input_count"] == 0


def test_exit_codes_for_preconditions(tmp_path, capsys):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"))
    assert main(["analyze", "--config", str(cfg)]) == 3
    assert "breachlens engineer" in capsys.readouterr().err
    cfg.write_text(json.dumps({"input_path": "x.csv", "test_fraction": 2}))
    assert main(["ingest", "--config", str(cfg)]) == 3
    assert main(["ingest", "--config", str(tmp_path / "missing.json")]) == 3


def test_single_class_target_and_short_series(tmp_path):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"), target="is_holiday_month",
                       feature_columns=["year"])
    assert run_stages(cfg, ["ingest", "engineer"]) == [0, 0]
    rows = lines(tmp_path / "out" / "engineered.jsonl")
    for r in rows:
        r["is_holiday_month"] = True
    (tmp_path / "out" / "engineered.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert main(["train", "--config", str(cfg)]) == 3
    # three distinct years is below every model's minimum
    for r, year in zip(rows, [2001, 2002, 2003] * 10):
        r["year"] = year
    (tmp_path / "out" / "engineered.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert main(["forecast", "--config", str(cfg)]) == 3


def test_lock_held(tmp_path):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"))
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / LOCK_NAME).write_text("1")
    assert main(["ingest", "--config", str(cfg)]) == 3
    (tmp_path / "out" / LOCK_NAME).unlink()
    assert main(["ingest", "--config", str(cfg)]) == 0
    assert not (tmp_path / "out" / LOCK_NAME).exists()


def test_seed_precedence(tmp_path):
    cfg = write_config(tmp_path, input_path="x.csv", seed=5)
    assert load_config(cfg, env={}).seed == 5
    assert load_config(cfg, env={"BREACHLENS_SEED": "9"}).seed == 9
    assert load_config(cfg, seed=1, env={"BREACHLENS_SEED": "9"}).seed == 1
    with pytest.raises(ConfigError):
        load_config(cfg, env={"BREACHLENS_SEED": "abc"})
    a = load_config(cfg, env={})
    b = load_config(cfg, out=tmp_path / "elsewhere", env={})
    assert a.config_hash() == b.config_hash() and b.output_dir == tmp_path / "elsewhere"


def test_env_seed_reaches_report(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"))
    monkeypatch.setenv("BREACHLENS_SEED", "7")
    assert run_stages(cfg, ["ingest", "report"]) == [0, 0]
    assert json.loads((tmp_path / "out" / "report.json").read_text())["provenance"]["seed"] == 7
    assert main(["report", "--config", str(cfg), "--seed", "3"]) == 0
    assert json.loads((tmp_path / "out" / "report.json").read_text())["provenance"]["seed"] == 3


def test_partial_run_report(tmp_path):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_20.csv"))
    assert run_stages(cfg, ["ingest", "engineer", "analyze", "report"]) == [0] * 4
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    jsonschema.validate(rep, report_schema())
    assert rep["forecasts"]["status"] == "missing" and "breachlens forecast" in rep["forecasts"]["reason"]
    assert rep["tables"]["arima_forecast"]["status"] == "missing"
    assert rep["tests"]["status"] == "ok"
    md = (tmp_path / "out" / "report.md").read_text()
    assert "_missing:" in md


def test_holiday_group_empty_is_noted(tmp_path):
    rows = [{"incident_id": str(i), "action": "Hacking", "year": "2020", "industry": "454110",
             "incident_month": "7", "summary": "breach" if i % 2 else "none"} for i in range(6)]
    src = tmp_path / "in.jsonl"
    src.write_text("".join(json.dumps(r) + "\n" for r in rows))
    cfg = write_config(tmp_path, input_path="in.jsonl", input_format="jsonl")
    assert run_stages(cfg, ["ingest", "engineer", "analyze"]) == [0, 0, 0]
    counts = read_csv(tmp_path / "out" / "monthly_counts.csv")
    assert [r["month"] for r in counts if r["count"] != "0"] == ["7"]
    tests = json.loads((tmp_path / "out" / "tests.json").read_text())
    assert "non_holiday" in tests["holiday_mann_whitney"]["error"]


def test_identical_scores_give_flat_holiday_test(tmp_path):
    rows = [{"incident_id": str(i), "action": "Hacking", "year": "2020", "industry": "454110",
             "incident_month": str(1 + i % 12), "summary": "breach"} for i in range(24)]
    (tmp_path / "in.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    cfg = write_config(tmp_path, input_path="in.jsonl", input_format="jsonl")
    assert run_stages(cfg, ["ingest", "engineer", "analyze"]) == [0, 0, 0]
    first = (tmp_path / "out" / "tests.json").read_bytes()
    assert json.loads(first)["holiday_mann_whitney"]["test"]["p_value"] >= 0.99
    assert main(["analyze", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "tests.json").read_bytes() == first


def test_xor_fixture_via_jsonl(tmp_path):
    rows = []
    for i in range(48):
        a, b = i % 2, (i // 2) % 2
        rows.append({"incident_id": f"X{i}", "action": "Hacking", "year": str(2010 + a), "industry": "454110",
                     "incident_month": str(1 + b), "summary": "email leaked" if a != b else "nothing"})
    (tmp_path / "xor.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    cfg = write_config(tmp_path, input_path="xor.jsonl", input_format="jsonl", smote=False, cv_folds=2,
                       model_presets=["xgb-like"], feature_columns=["year", "incident_month"],
                       importance={"mode": "exact", "eval_rows": 4, "background_size": 8})
    assert run_stages(cfg, ["ingest", "engineer", "train"]) == [0, 0, 0]
    out = tmp_path / "out"
    before = json.loads((out / "metrics_before.json").read_text())
    assert before["xgb-like"]["test"]["accuracy"] == 1.0
    assert json.loads((out / "metrics_after.json").read_text()) == {"skipped": "smote disabled in config"}
    assert {r["feature"] for r in read_csv(out / "importance.csv")} == {"year", "incident_month"}


def test_forecast_without_holdout(tmp_path):
    cfg = write_config(tmp_path, input_path=str(FIXTURES / "incidents_400.csv"),
                       forecast={"model": "both", "horizon": 2})
    assert run_stages(cfg, ["ingest", "engineer", "forecast", "report"]) == [0] * 4
    out = tmp_path / "out"
    metrics = json.loads((out / "forecast_metrics.json").read_text())
    assert metrics["holdout_years"] == [] and "no holdout" in metrics["note"]
    assert metrics["arima"] is None and metrics["trend"] is None
    for name in ("arima_forecast.csv", "trend_forecast.csv"):
        assert [int(r["label"]) for r in read_csv(out / name)] == [2024, 2025]
    rep = json.loads((out / "report.json").read_text())
    assert rep["forecasts"]["forecast_metrics"]["note"].startswith("no holdout")
    # switching to one model removes the other model's stale files
    cfg.write_text(json.dumps({**json.loads(cfg.read_text()), "forecast": {"model": "trend"}}))
    assert main(["forecast", "--config", str(cfg)]) == 0
    assert not (out / "arima_forecast.csv").exists() and (out / "trend_forecast.csv").exists()


def test_full_run_report(twin_runs):
    out, _ = twin_runs
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, report_schema())
    for name in rep["artifacts"]:
        path = out / name
        assert path.is_file()
        if name.endswith(".json"):
            json.loads(path.read_text())
        elif name.endswith(".jsonl"):
            lines(path)
        else:
            assert read_csv(path)
    for key, table in rep["tables"].items():
        assert table["status"] == "ok", key
    assert rep["tables"]["arima_forecast"]["columns"][2] == "Lower Bound (95%)"
    assert rep["tables"]["trend_forecast"]["columns"][2] == "Lower Bound (80%)"
    man = MANIFEST["fixtures"]["incidents_400.csv"]
    assert rep["ingest"]["ingest_report"]["retained_count"] == man["retained_count"]


def test_report_rerender_is_byte_identical(twin_runs, tmp_path):
    out, _ = twin_runs
    before = (out / "report.json").read_bytes(), (out / "report.md").read_bytes()
    cfg = out.parent / "run.json"
    assert main(["report", "--config", str(cfg)]) == 0
    assert ((out / "report.json").read_bytes(), (out / "report.md").read_bytes()) == before


def test_csv_and_json_conventions(twin_runs):
    out, _ = twin_runs
    raw = (out / "series.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n") > 1
    text = (out / "metrics_before.json").read_text()
    assert text.endswith("\n")
    assert json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n" == text


def test_after_smote_f1_not_worse(twin_runs):
    out, _ = twin_runs
    before = json.loads((out / "metrics_before.json").read_text())
    after = json.loads((out / "metrics_after.json").read_text())
    for preset in before:
        assert after[preset]["test"]["f1"] >= before[preset]["test"]["f1"], preset
