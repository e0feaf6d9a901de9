"""Assemble report.json and report.md from whatever artifacts exist."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .. import __version__
from .artifacts import dumps, read_csv, read_json
from .config import RunConfig

SECTION_FILES = {
    "ingest": ["ingest_report.json"],
    "eda": ["distributions.json", "monthly_counts.csv", "holiday_comparison.csv", "correlation.json"],
    "tests": ["tests.json"],
    "outliers": ["outliers.json"],
    "model_metrics": ["metrics_before.json", "metrics_after.json", "confusion.json"],
    "importance": ["importance.csv"],
    "forecasts": ["series.csv", "forecast_metrics.json"],
}


def _load(out: Path, name: str):
    path = out / name
    return read_json(path) if name.endswith(".json") else read_csv(path)


def _section(out: Path, files: list[str], stage: str) -> dict:
    missing = [f for f in files if not (out / f).is_file()]
    if missing:
        return {"status": "missing", "reason": f"{', '.join(missing)} not found; run `breachlens {stage}`"}
    return {"status": "ok", **{Path(f).stem: _load(out, f) for f in files}}


def _table(columns, rows) -> dict:
    return {"status": "ok", "columns": columns, "rows": rows}


def _missing(reason: str) -> dict:
    return {"status": "missing", "reason": reason}


def _num(x, digits=4):
    if x is None or x == "":
        return None
    if isinstance(x, str):
        try:
            x = float(x)
        except ValueError:
            return x
    return round(float(x), digits)


def _forecast_table(out: Path, name: str, level_key: str, level_file: str) -> dict:
    if not (out / name).is_file():
        return _missing(f"{name} not found; run `breachlens forecast`")
    level = read_json(out / level_file).get(level_key)
    pct = f"{round(100 * level)}%" if isinstance(level, (int, float)) else "?"
    rows = [[int(r["label"]), _num(r["point"]), _num(r["lower"]), _num(r["upper"])] for r in read_csv(out / name)]
    return _table(["Year", "Forecast", f"Lower Bound ({pct})", f"Upper Bound ({pct})"], rows)


def _arima_selection(out: Path) -> dict:
    if not (out / "arima_fit.json").is_file():
        return _missing("arima_fit.json not found; run `breachlens forecast` with the arima model")
    fit = read_json(out / "arima_fit.json")
    metrics = read_json(out / "forecast_metrics.json").get("arima") if (out / "forecast_metrics.json").is_file() else None
    visited = sorted(fit["stepwise"], key=lambda v: (v["aic"], v["order"], not v["intercept"]))
    rows = []
    for i, v in enumerate(visited):
        label = "Selected Model" if i == 0 else "Runner-up Model" if i == 1 else "Model"
        order = "ARIMA({},{},{}){}".format(*v["order"], " intercept" if v["intercept"] else "")
        good = i == 0 and isinstance(metrics, dict) and "rmse" in metrics
        rows.append([label, order, _num(v["aic"], 2),
                     _num(metrics["rmse"], 5) if good else None, _num(metrics["mae"], 4) if good else None])
    return _table(["Model", "ARIMA Order", "AIC", "RMSE", "MAE"], rows)


def _trend_summary(out: Path) -> dict:
    if not (out / "trend_fit.json").is_file():
        return _missing("trend_fit.json not found; run `breachlens forecast` with the trend model")
    fit = read_json(out / "trend_fit.json")
    m = read_json(out / "forecast_metrics.json").get("trend") if (out / "forecast_metrics.json").is_file() else None
    good = isinstance(m, dict) and "rmse" in m
    return _table(["Model", "Changepoints Detected", "RMSE", "MAE", "Normalized MAE"],
                  [["Changepoint trend", len(fit["changepoints"]),
                    _num(m["rmse"]) if good else None, _num(m["mae"]) if good else None,
                    _num(m["normalized_mae"]) if good else None]])


def _association_tests(out: Path) -> dict:
    if not (out / "tests.json").is_file():
        return _missing("tests.json not found; run `breachlens analyze`")
    tests = read_json(out / "tests.json")
    rows = []
    for key, label in (("seasonal", "season"), ("pii_keyword", "PII")):
        block = tests[key]
        for name, title in (("anova", "ANOVA"), ("kruskal_wallis", "Kruskal-Wallis")):
            r = block[name]
            if "error" in r:
                rows.append([f"{title} ({label})", None, None, r["error"]])
            else:
                rows.append([f"{title} ({label})", _num(r["statistic"], 2), _num(r["p_value"]),
                             "Yes" if r["significant"] else "No"])
    hol = tests["holiday_mann_whitney"]
    if "error" in hol:
        rows.append(["Mann-Whitney (holiday)", None, None, hol["error"]])
    else:
        t = hol["test"]
        rows.append(["Mann-Whitney (holiday)", _num(t["statistic"], 2), _num(t["p_value"]),
                     "Yes" if t["significant"] else "No"])
    return _table(["Test", "Statistic", "p-value", "Significant"], rows)


def _model_comparison(out: Path) -> dict:
    if not (out / "metrics_before.json").is_file():
        return _missing("metrics_before.json not found; run `breachlens train`")
    before = read_json(out / "metrics_before.json")
    after = read_json(out / "metrics_after.json") if (out / "metrics_after.json").is_file() else {}
    rows = []
    for preset in before:
        b = before[preset]["test"]
        a = after.get(preset, {}).get("test") if isinstance(after.get(preset), dict) else None
        rows.append([preset, _num(b["accuracy"]), _num(b["f1"]), _num(b["roc_auc"]),
                     _num(a["accuracy"]) if a else None, _num(a["f1"]) if a else None,
                     _num(a["roc_auc"]) if a else None])
    return _table(["Model", "Accuracy (Before)", "F1 Score (Before)", "ROC AUC (Before)",
                   "Accuracy (After)", "F1 Score (After)", "ROC AUC (After)"], rows)


def build_report(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    stages = {"ingest": "ingest", "eda": "analyze", "tests": "analyze", "outliers": "analyze",
              "model_metrics": "train", "importance": "train", "forecasts": "forecast"}
    report = {name: _section(out, SECTION_FILES[name], stages[name]) for name in SECTION_FILES}
    if report["forecasts"]["status"] == "ok":
        for name in ("arima_forecast.csv", "trend_forecast.csv", "arima_fit.json", "trend_fit.json"):
            if (out / name).is_file():
                report["forecasts"][Path(name).stem] = _load(out, name)
    report["tables"] = {
        "arima_forecast": _forecast_table(out, "arima_forecast.csv", "level", "arima_fit.json"),
        "arima_selection": _arima_selection(out),
        "trend_forecast": _forecast_table(out, "trend_forecast.csv", "level", "trend_fit.json"),
        "trend_summary": _trend_summary(out),
        "association_tests": _association_tests(out),
        "model_comparison": _model_comparison(out),
    }
    names = sorted({f for files in SECTION_FILES.values() for f in files}
                   | {"arima_forecast.csv", "trend_forecast.csv", "arima_fit.json", "trend_fit.json",
                      "incidents.jsonl", "engineered.jsonl", "split_plan.json", "smote_inputs.json",
                      "roc_points.csv"})
    report["artifacts"] = [n for n in names if (out / n).is_file()]
    report["provenance"] = {"seed": cfg.seed, "config_hash": cfg.config_hash(), "version": __version__}
    return report


def report_schema() -> dict:
    text = resources.files("breachlens").joinpath("data/report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _md_cell(v) -> str:
    if v is None:
        return "n/a"
    return str(v)


def render_markdown(report: dict) -> str:
    titles = {
        "arima_forecast": "ARIMA forecast",
        "arima_selection": "ARIMA stepwise selection",
        "trend_forecast": "Changepoint trend forecast",
        "trend_summary": "Changepoint trend model",
        "association_tests": "Association tests",
        "model_comparison": "Model performance before vs after SMOTE",
    }
    lines = ["# breachlens run report", ""]
    prov = report["provenance"]
    lines += [f"- seed: {prov['seed']}", f"- config hash: `{prov['config_hash']}`",
              f"- version: {prov['version']}", ""]
    ing = report["ingest"]
    lines += ["## Ingest", ""]
    if ing["status"] == "ok":
        r = ing["ingest_report"]
        lines.append(f"{r['input_count']} records read, {r['retained_count']} retained.")
        for reason, n in r["dropped"].items():
            lines.append(f"- dropped ({reason}): {n}")
    else:
        lines.append(f"_missing: {ing['reason']}_")
    lines.append("")
    for key, title in titles.items():
        t = report["tables"][key]
        lines += [f"## {title}", ""]
        if t["status"] != "ok":
            lines += [f"_missing: {t['reason']}_", ""]
            continue
        lines.append("| " + " | ".join(t["columns"]) + " |")
        lines.append("|" + "---|" * len(t["columns"]))
        for row in t["rows"]:
            lines.append("| " + " | ".join(_md_cell(v) for v in row) + " |")
        lines.append("")
    imp = report["importance"]
    lines += ["## Feature importance (mean |Shapley value|)", ""]
    if imp["status"] == "ok":
        lines += ["| Model | Rank | Feature | Mean abs SHAP |", "|---|---|---|---|"]
        for r in imp["importance"]:
            if int(r["rank"]) <= 10:
                lines.append(f"| {r['model']} | {r['rank']} | {r['feature']} | {_num(r['mean_abs_shap'])} |")
    else:
        lines.append(f"_missing: {imp['reason']}_")
    lines.append("")
    return "\n".join(lines)


def write_report(cfg: RunConfig) -> dict:
    report = build_report(cfg)
    jsonschema.validate(json.loads(dumps(report)), report_schema())
    out = cfg.output_dir
    (out / "report.json").write_text(dumps(report), encoding="utf-8", newline="\n")
    (out / "report.md").write_text(render_markdown(report), encoding="utf-8", newline="\n")
    return report
