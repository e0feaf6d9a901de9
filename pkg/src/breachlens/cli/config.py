"""Run configuration: JSON file, schema validation, defaults and overrides."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from ..errors import ConfigError
from ..features import HOLIDAY_MONTHS

SEED_ENV = "BREACHLENS_SEED"

# label-encoding feature list of the reference pipeline
DEFAULT_FEATURES = [
    "industry", "country", "state", "year", "actor_external", "action", "confidentiality",
    "summary_length", "keyword_count", "risk_terms_score", "victim_sector",
    "country_code", "region_group", "threat_enrichment_score",
]

DEFAULTS = {
    "input_format": "csv",
    "lexicon_path": None,
    "output_dir": "out",
    "seed": 42,
    "holiday_months": sorted(HOLIDAY_MONTHS),
    "filter": {},
    "feature_columns": DEFAULT_FEATURES,
    "target": "contains_pii_terms",
    "test_fraction": 0.2,
    "cv_folds": 5,
    "smote": True,
    "smote_k": 5,
    "model_presets": ["logistic", "xgb-like", "lgbm-like"],
    "importance": {"mode": "sampled", "n_permutations": 16, "background_size": 64, "eval_rows": 32},
    "analysis": {
        "distribution_fields": ["action_type", "season", "region_group", "victim_sector",
                                "actor_external", "country"],
        "correlation_columns": ["contains_pii_terms", "keyword_count", "risk_terms_score",
                                "threat_enrichment_score", "summary_length"],
        "outlier_columns": ["summary_length", "keyword_count", "risk_terms_score",
                            "threat_enrichment_score"],
    },
    "forecast": {"train_end_year": None, "horizon": 3, "level": 0.95, "trend_level": 0.80,
                 "model": "both", "boxcox": False, "l1_penalty": None, "n_boot": 500},
}


def _schema() -> dict:
    text = resources.files("breachlens").joinpath("data/config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    values: dict
    base_dir: Path
    output_dir: Path

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def input_path(self) -> Path:
        return self.base_dir / self.values["input_path"]

    @property
    def lexicon_path(self) -> Path | None:
        p = self.values.get("lexicon_path")
        return None if p is None else self.base_dir / p

    def config_hash(self) -> str:
        """SHA-256 of the effective configuration, excluding where outputs go."""
        hashed = {k: v for k, v in self.values.items() if k != "output_dir"}
        blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def validate(raw: dict) -> dict:
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return _merge(DEFAULTS, raw)


def load_config(path: str | Path, seed: int | None = None, out: str | Path | None = None,
                env: dict | None = None) -> RunConfig:
    """Read and validate a config; precedence for the seed is --seed, then
    BREACHLENS_SEED, then the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    values = validate(raw)
    env = os.environ if env is None else env
    if seed is not None:
        values["seed"] = seed
    elif env.get(SEED_ENV):
        try:
            values["seed"] = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from exc
    if values["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    base = path.resolve().parent
    out_dir = Path(out) if out is not None else base / values["output_dir"]
    return RunConfig(values, base, out_dir)
