"""Stage drivers behind the subcommands. Each reads the previous stage's
artifacts from the output directory and writes its own."""
from __future__ import annotations

import json
import statistics
from pathlib import Path

import numpy as np

from .. import stats
from ..errors import BreachlensError, DomainError, InputError, PreconditionError
from ..features import EngineeredIncident, Lexicon, engineer
from ..forecast import (KPSS_LEVEL_CRITICAL_5PCT, aggregate_annual, auto_arima, boxcox,
                        fit_trend_model, forecast_arima, forecast_metrics, forecast_trend)
from ..forecast.kpss import KPSS_MIN_LENGTH
from ..forecast.trend import TREND_MIN_LENGTH
from ..ingest import IncidentRecord, ingest, write_jsonl
from ..learn import (PRESETS, background_sample, evaluate, global_importance, model_to_dict,
                     roc_points, train_gbdt, train_logistic)
from ..resample import (DataMatrix, EncoderState, balance_with_smote, label_encode_apply,
                        label_encode_fit, scale_matrix, stratified_kfold, stratified_split)
from .artifacts import read_json, write_csv, write_json
from .config import RunConfig

INCIDENTS = "incidents.jsonl"
INGEST_REPORT = "ingest_report.json"
ENGINEERED = "engineered.jsonl"

ARIMA_MIN_YEARS = KPSS_MIN_LENGTH
TREND_MIN_YEARS = TREND_MIN_LENGTH


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(rows, fh)


def _require(out: Path, name: str, stage: str) -> Path:
    path = out / name
    if not path.is_file():
        raise PreconditionError(f"{name} not found in {out}; run `breachlens {stage}` first")
    return path


def load_engineered(out: Path) -> list[EngineeredIncident]:
    path = _require(out, ENGINEERED, "engineer")
    with path.open(encoding="utf-8") as fh:
        return [EngineeredIncident.from_dict(json.loads(line)) for line in fh if line.strip()]


# -- ingest / engineer ------------------------------------------------------

def run_ingest(cfg: RunConfig) -> dict:
    path = cfg.input_path
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    filt = {k: (dict(v) if k == "exact_codes" else tuple(v)) for k, v in cfg["filter"].items()}
    records, report = ingest(data, cfg["input_format"], **filt)
    out = cfg.output_dir
    _write_jsonl(out / INCIDENTS, (r.to_dict() for r in records))
    write_json(out / INGEST_REPORT, report.to_dict())
    return report.to_dict()


def run_engineer(cfg: RunConfig) -> int:
    out = cfg.output_dir
    path = _require(out, INCIDENTS, "ingest")
    with path.open(encoding="utf-8") as fh:
        records = [IncidentRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
    lexicon = Lexicon.load(cfg.lexicon_path) if cfg.lexicon_path else Lexicon.default()
    engineered = engineer(records, lexicon, cfg["holiday_months"])
    _write_jsonl(out / ENGINEERED, (e.to_dict() for e in engineered))
    return len(engineered)


# -- analyze ------------------------------------------------------------------

def _attempt(fn):
    try:
        return fn()
    except BreachlensError as exc:
        return {"error": str(exc)}


def _group_tests(groups: dict[str, list[float]], value: str, grouping: str) -> dict:
    labels = list(groups)
    result = {"value": value, "grouping": grouping, "groups": labels,
              "n": {k: len(v) for k, v in groups.items()}}
    for name, fn in (("anova", stats.anova_oneway), ("kruskal_wallis", stats.kruskal_wallis)):
        result[name] = _attempt(lambda fn=fn: fn([groups[k] for k in labels]).to_dict())
    return result


def _numeric(v) -> float:
    if v is None:
        return float("nan")
    return float(v)


def run_analyze(cfg: RunConfig) -> None:
    out = cfg.output_dir
    incidents = load_engineered(out)
    opts = cfg["analysis"]

    counts = stats.monthly_counts(incidents)
    write_csv(out / "monthly_counts.csv", ["month", "count"], sorted(counts.items()))

    def holiday():
        res = stats.holiday_comparison(incidents)
        return {**{k: v for k, v in res.items() if k != "test"}, "test": res["test"].to_dict()}

    hol = _attempt(holiday)
    if "error" in hol:
        write_csv(out / "holiday_comparison.csv", ["group", "n", "mean_threat_enrichment_score"], [])
    else:
        write_csv(out / "holiday_comparison.csv", ["group", "n", "mean_threat_enrichment_score"],
                  [["holiday", hol["n_holiday"], hol["mean_holiday"]],
                   ["non_holiday", hol["n_non_holiday"], hol["mean_non_holiday"]]])

    pii = {"0": [], "1": []}
    for inc in incidents:
        pii["1" if inc.contains_pii_terms else "0"].append(float(inc.keyword_count))
    tests = {
        "holiday_mann_whitney": hol,
        "seasonal": _group_tests(stats.season_groups(incidents, "threat_enrichment_score"),
                                 "threat_enrichment_score", "season"),
        "pii_keyword": _group_tests({k: v for k, v in pii.items() if v}, "keyword_count",
                                    "contains_pii_terms"),
    }
    write_json(out / "tests.json", tests)

    dist = {}
    for name in opts["distribution_fields"]:
        dist[name] = [{"label": k, "count": c, "percent": p}
                      for k, (c, p) in stats.categorical_distribution(incidents, name).items()]
    write_json(out / "distributions.json", dist)

    def correlation():
        cols = opts["correlation_columns"]
        rows = np.array([[_numeric(inc.get(c)) for c in cols] for inc in incidents], dtype=float)
        if rows.shape[0] < 2:
            raise DomainError("correlation needs at least two incidents")
        if not np.all(np.isfinite(rows)):
            raise DomainError("correlation columns must be numeric and present on every incident")
        return stats.correlation_matrix(rows, cols).to_dict()

    write_json(out / "correlation.json", _attempt(correlation))

    outliers = []
    for col in opts["outlier_columns"]:
        vals = [_numeric(inc.get(col)) for inc in incidents]
        rep = _attempt(lambda vals=vals, col=col: stats.iqr_outliers(vals, col).to_dict())
        outliers.append({"column": col, **rep} if "error" in rep else rep)
    write_json(out / "outliers.json", outliers)


# -- train --------------------------------------------------------------------

def build_matrix(incidents, columns: list[str], target: str):
    """Encode the configured feature columns; returns (matrix, positions, dropped).

    ``positions`` maps matrix rows to line positions in engineered.jsonl.
    Rows whose target is missing are skipped. String columns are label
    encoded with "Unknown" in the map; missing numerics take the median.
    """
    positions = [i for i, inc in enumerate(incidents) if inc.get(target) is not None]
    rows = [incidents[i] for i in positions]
    y = []
    for inc in rows:
        v = inc.get(target)
        if v not in (0, 1, True, False):
            raise PreconditionError(f"target {target!r} must be binary, found {v!r}")
        y.append(int(v))
    enc = EncoderState()
    names, cols, dropped = [], [], []
    for c in columns:
        vals = [inc.get(c) for inc in rows]
        present = [v for v in vals if v is not None]
        if not present:
            dropped.append(c)
            continue
        if any(isinstance(v, (list, dict)) for v in present):
            raise PreconditionError(f"feature column {c!r} is not scalar")
        if any(isinstance(v, str) for v in present):
            mapping = label_encode_fit([*vals, None])
            enc.label_maps[c] = mapping
            cols.append(np.array(label_encode_apply(vals, mapping), dtype=float))
        else:
            med = statistics.median(float(v) for v in present)
            cols.append(np.array([med if v is None else float(v) for v in vals], dtype=float))
        names.append(c)
    if not names:
        raise PreconditionError("none of the configured feature columns is present")
    X = np.column_stack(cols) if rows else np.zeros((0, len(names)))
    return DataMatrix(names, X, np.array(y, dtype=int), enc), positions, dropped


def _fit(preset: str, train: DataMatrix, seed: int):
    """Returns (model, transform) where transform maps raw matrices to model input."""
    if preset == "logistic":
        (scaled,) = scale_matrix(train)
        params = scaled.encoders.minmax

        def transform(m: DataMatrix) -> np.ndarray:
            return scale_matrix(train, m)[1].rows

        model = train_logistic(scaled.rows, train.labels)
        return model, transform, {"minmax": {c: list(v) for c, v in params.items()}}
    model = train_gbdt(train.rows, train.labels, PRESETS[preset])
    return model, (lambda m: m.rows), {}


def _cv(preset, train: DataMatrix, k: int, seed: int) -> dict:
    try:
        folds = stratified_kfold(train.labels, k, seed)
    except DomainError as exc:
        return {"error": str(exc)}
    per_fold = []
    for tr, va in folds:
        model, transform, _ = _fit(preset, train.take(tr), seed)
        val = train.take(va)
        m = evaluate(model.predict_proba(transform(val)), val.labels)
        per_fold.append({"accuracy": m.accuracy, "f1": m.f1, "roc_auc": m.roc_auc})
    mean = {key: float(np.mean([f[key] for f in per_fold])) for key in ("accuracy", "f1", "roc_auc")}
    return {"folds": per_fold, "mean": mean}


def run_train(cfg: RunConfig) -> None:
    out = cfg.output_dir
    seed = cfg.seed
    incidents = load_engineered(out)
    matrix, positions, dropped = build_matrix(incidents, list(cfg["feature_columns"]), cfg["target"])
    counts = {c: int((matrix.labels == c).sum()) for c in (0, 1)}
    if min(counts.values()) == 0:
        raise PreconditionError(f"target {cfg['target']!r} has a single class {counts}; training needs both")
    try:
        plan = stratified_split(matrix.labels, cfg["test_fraction"], seed)
    except DomainError as exc:
        raise PreconditionError(str(exc)) from exc
    train, test = matrix.take(plan.train_indices), matrix.take(plan.test_indices)
    pos = np.asarray(positions)
    ids = [incidents[p].base.incident_id for p in positions]

    plan_doc = {
        "seed": seed,
        "row_index": "line positions in engineered.jsonl",
        "train": pos[plan.train_indices].tolist(),
        "test": pos[plan.test_indices].tolist(),
        "test_ids": [ids[i] for i in plan.test_indices],
        "feature_columns": matrix.column_names,
        "dropped_features": dropped,
        "class_counts": {str(k): v for k, v in counts.items()},
        "encoders": matrix.encoders.to_dict(),
    }
    try:
        folds = stratified_kfold(train.labels, cfg["cv_folds"], seed)
        plan_doc["folds"] = [{"train": pos[np.asarray(plan.train_indices)[tr]].tolist(),
                              "validation": pos[np.asarray(plan.train_indices)[va]].tolist()}
                             for tr, va in folds]
    except DomainError as exc:
        plan_doc["folds"] = {"error": str(exc)}
    write_json(out / "split_plan.json", plan_doc)

    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    presets = list(cfg["model_presets"])
    before, after, confusion, roc_rows, final = {}, {}, {}, [], {}

    def save(preset, phase, model, extra):
        doc = {**model_to_dict(model), "feature_columns": matrix.column_names, "phase": phase,
               "preprocessing": extra}
        write_json(models_dir / f"{preset}__{phase}.json", doc)

    for preset in presets:
        model, transform, extra = _fit(preset, train, seed)
        p = model.predict_proba(transform(test))
        m = evaluate(p, test.labels)
        before[preset] = {"test": m.to_dict(), "cv": _cv(preset, train, cfg["cv_folds"], seed)}
        confusion[preset] = {"before": m.confusion}
        roc_rows += [[preset, "before", *pt] for pt in roc_points(p, test.labels)]
        save(preset, "before", model, extra)
        final[preset] = (model, transform, train)

    smote_doc = {"enabled": bool(cfg["smote"])}
    if cfg["smote"]:
        balanced = balance_with_smote(train, cfg["smote_k"], seed)
        n_synth = len(balanced.labels) - len(train.labels)
        smote_doc.update({
            "k": cfg["smote_k"],
            "input_rows": sorted(pos[plan.train_indices].tolist()),
            "input_ids": sorted(ids[i] for i in plan.train_indices),
            "synthetic_rows": n_synth,
            "class_counts_after": {str(c): int((balanced.labels == c).sum()) for c in (0, 1)},
        })
        plan2 = stratified_split(balanced.labels, cfg["test_fraction"], seed)
        bal_train, bal_val = balanced.take(plan2.train_indices), balanced.take(plan2.test_indices)
        smote_doc["second_split"] = {"train": len(plan2.train_indices), "validation": len(plan2.test_indices)}
        for preset in presets:
            model, transform, extra = _fit(preset, bal_train, seed)
            p = model.predict_proba(transform(test))
            m = evaluate(p, test.labels)
            v = evaluate(model.predict_proba(transform(bal_val)), bal_val.labels)
            after[preset] = {"test": m.to_dict(), "validation": v.to_dict()}
            confusion[preset]["after"] = m.confusion
            roc_rows += [[preset, "after", *pt] for pt in roc_points(p, test.labels)]
            save(preset, "after", model, extra)
            final[preset] = (model, transform, bal_train)
        write_json(out / "metrics_after.json", after)
    else:
        write_json(out / "metrics_after.json", {"skipped": "smote disabled in config"})
    write_json(out / "smote_inputs.json", smote_doc)
    write_json(out / "metrics_before.json", before)
    write_json(out / "confusion.json", confusion)
    write_csv(out / "roc_points.csv", ["model", "phase", "fpr", "tpr", "threshold"], roc_rows)

    imp = cfg["importance"]
    rows = []
    eval_m = test.take(np.arange(min(imp["eval_rows"], len(test.labels))))
    for preset in presets:
        model, transform, fit_data = final[preset]
        bg = background_sample(transform(fit_data), imp["background_size"], seed)
        ranked = global_importance(model, transform(eval_m), bg, matrix.column_names,
                                   mode=imp["mode"], n_permutations=imp["n_permutations"], seed=seed)
        rows += [[preset, rank, feat, val] for rank, (feat, val) in enumerate(ranked, start=1)]
    write_csv(out / "importance.csv", ["model", "rank", "feature", "mean_abs_shap"], rows)


# -- forecast -----------------------------------------------------------------

def run_forecast(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    seed = cfg.seed
    fc = cfg["forecast"]
    incidents = load_engineered(out)
    try:
        series = aggregate_annual(incidents, "risk_terms_score")
    except DomainError as exc:
        raise PreconditionError(str(exc)) from exc
    last = series.years[-1]
    train_end = fc["train_end_year"] if fc["train_end_year"] is not None else last
    train = series.slice_years(last=train_end)
    holdout = series.slice_years(first=train_end + 1)
    want_arima = fc["model"] in ("arima", "both")
    want_trend = fc["model"] in ("trend", "both")
    n = len(train)
    if want_arima and n < ARIMA_MIN_YEARS:
        raise PreconditionError(f"ARIMA needs at least {ARIMA_MIN_YEARS} training years, got {n}")
    if want_trend and n < TREND_MIN_YEARS:
        raise PreconditionError(f"the trend model needs at least {TREND_MIN_YEARS} training years, got {n}")

    write_csv(out / "series.csv", ["year", "value", "filled", "split"],
              [[y, v, f, "train" if y <= train_end else "holdout"]
               for y, v, f in zip(series.years, series.values, series.filled)])
    h = len(holdout) + fc["horizon"]
    labels = list(range(train_end + 1, train_end + 1 + h))
    y = np.asarray(train.values, dtype=float)
    metrics = {"train_years": [train.years[0], train.years[-1]], "holdout_years": holdout.years}
    if not holdout.years:
        metrics["note"] = "no holdout: train_end_year is the last observed year"

    def holdout_metrics(result):
        if not holdout.years:
            return None
        return _attempt(lambda: forecast_metrics(holdout.values, result.point[:len(holdout)]))

    for name in ("arima_fit.json", "arima_forecast.csv", "trend_fit.json", "trend_forecast.csv"):
        (out / name).unlink(missing_ok=True)

    header = ["label", "point", "lower", "upper"]
    if want_arima:
        bc = None
        work = y
        if fc["boxcox"]:
            work, bc = boxcox(y, shift_to_positive=True)
        try:
            res = auto_arima(work, return_trace=True)
        except BreachlensError as exc:
            raise PreconditionError(f"ARIMA selection failed: {exc}") from exc
        result = forecast_arima(res.best, h, fc["level"], labels)
        if bc is not None:
            result.point = bc.inverse(result.point).tolist()
            result.lower = bc.inverse(result.lower).tolist()
            result.upper = bc.inverse(result.upper).tolist()
        write_json(out / "arima_fit.json", {
            **res.best.to_dict(), "d_by_kpss": res.d, "kpss_critical_5pct": KPSS_LEVEL_CRITICAL_5PCT,
            "stepwise": res.visited, "failures": res.failures, "model_tag": result.model_tag,
            "boxcox": None if bc is None else {"lambda": bc.lam, "shift": bc.shift}, "level": fc["level"],
        })
        write_csv(out / "arima_forecast.csv", header, [[r[k] for k in header] for r in result.rows()])
        metrics["arima"] = holdout_metrics(result)
    if want_trend:
        model = fit_trend_model(y, l1_penalty=fc["l1_penalty"], seed=seed)
        result = forecast_trend(model, y, h, fc["trend_level"], fc["n_boot"], seed, labels)
        first = train.years[0]
        write_json(out / "trend_fit.json", {
            **model.to_dict(), "changepoint_years": [first + s for s in model.changepoints],
            "level": fc["trend_level"], "n_boot": fc["n_boot"],
        })
        write_csv(out / "trend_forecast.csv", header, [[r[k] for k in header] for r in result.rows()])
        metrics["trend"] = holdout_metrics(result)
    write_json(out / "forecast_metrics.json", metrics)
    return metrics
