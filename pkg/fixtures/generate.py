"""Generate the synthetic breach fixtures and their manifest.

Every row is built from known parts, so the manifest records what each stage
must produce (retention, drop reason, keyword and risk counts, PII flag)
without running the pipeline. Re-running with the same seed rewrites the
files byte for byte.

    python fixtures/generate.py            # writes next to this script
"""
from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
SEED = 20240611

COLUMNS = [
    "incident_id", "summary", "industry", "victim_id", "country", "state", "country_code",
    "region_group", "victim_sector", "actor_external", "actor_internal", "action",
    "confidentiality", "integrity", "year", "incident_month", "incident_quarter",
    "reference_date", "incident_month_name", "reference",
]
MONTH_NAMES = ["January", "February", "March", "April", "May", "June", "July", "August",
               "September", "October", "November", "December"]
HOLIDAY = {6, 7, 11, 12}

THREAT = ["phishing", "ransomware", "malware", "breach", "exploit", "credential", "ddos",
          "injection", "skimming", "botnet"]
RISK = {"critical": 3, "severe": 2, "urgent": 2, "compromise": 1, "exposed": 1}
PII = ["ssn", "passport", "email", "credit card", "medical"]
# filler vocabulary chosen to contain no lexicon or e-commerce keyword substrings
FILLER = ["attackers", "targeted", "the", "organisation", "systems", "were", "affected",
          "investigation", "is", "ongoing", "records", "staff", "noticed", "unusual", "activity",
          "on", "servers", "after", "hours", "vendor", "notified", "regulators"]

ECOM_CODES = ["454110", "454112", "4541", "443142", "519130", "541511", "518210"]
ECOM_PREFIX_ONLY = ["44", "4481", "5191", "49"]
OTHER_CODES = ["621111", "611310", "922120", "311811", "236115"]
COUNTRIES = [("United States", "US", "North America", "CA"), ("United Kingdom", "GB", "Europe", "Unknown"),
             ("Canada", "CA", "North America", "ON"), ("Germany", "DE", "Europe", "Unknown"),
             ("Australia", "AU", "Oceania", "NSW")]
SECTORS = ["Retail", "Finance", "Information", "Healthcare", "Public"]
ACTORS = ["Organized crime", "Unaffiliated", "Activist", "State-affiliated", "Unknown"]
ACTIONS = ["Hacking - Brute force", "Malware - Ransomware", "Social - Phishing",
           "Error - Misconfiguration", "Misuse - Privilege abuse", "Physical - Theft"]


def _summary(rng, n_threat: int, risk_terms: list[str], pii_terms: list[str], ecom_word: str | None) -> str:
    words = list(rng.choice(FILLER, size=int(rng.integers(4, 9))))
    words += list(rng.choice(THREAT, size=n_threat))
    words += risk_terms + pii_terms
    if ecom_word:
        words.append(ecom_word)
    order = rng.permutation(len(words))
    return " ".join(words[i] for i in order).capitalize() + "."


def make_rows(n: int, seed: int, pii_rate: float = 0.1):
    """Rows plus per-row expectations. Row kinds, in proportion:

    ecommerce by industry prefix 70%, by keyword only 10%, not ecommerce 10%,
    missing action 5%, missing year 5%.
    """
    rng = np.random.default_rng(seed)
    rows, expect = [], []
    kinds = rng.choice(["prefix", "keyword", "other", "no_action", "no_year"], size=n,
                       p=[0.70, 0.10, 0.10, 0.05, 0.05])
    for i, kind in enumerate(kinds):
        year = int(rng.integers(2005, 2024))
        month = int(rng.integers(1, 13))
        holiday = month in HOLIDAY
        pii = bool(rng.random() < pii_rate)
        n_threat = int(rng.poisson(2.0 if holiday else 1.0))
        risk_terms = list(rng.choice(list(RISK), size=int(rng.integers(0, 3)), replace=False))
        pii_terms = list(rng.choice(PII, size=int(rng.integers(1, 3)), replace=False)) if pii else []
        country, code, region, state = COUNTRIES[int(rng.integers(len(COUNTRIES)))]
        if kind == "keyword":
            industry = str(rng.choice(OTHER_CODES))
            ecom_word = str(rng.choice(["online shop", "checkout page", "retail platform"]))
        elif kind == "other":
            industry = str(rng.choice(OTHER_CODES))
            ecom_word = None
        else:
            industry = str(rng.choice(ECOM_CODES + ECOM_PREFIX_ONLY))
            ecom_word = None
        # leading zeros exercise industry-code normalisation
        if rng.random() < 0.1:
            industry = "0" + industry
        summary = _summary(rng, n_threat, risk_terms, pii_terms, ecom_word)
        row = {
            "incident_id": f"INC-{seed % 1000:03d}-{i:04d}",
            "summary": summary,
            "industry": industry,
            "victim_id": f"Victim {i}",
            "country": country,
            "state": state,
            "country_code": code,
            "region_group": region,
            "victim_sector": str(rng.choice(SECTORS)),
            "actor_external": str(rng.choice(ACTORS)),
            "actor_internal": "Unknown" if rng.random() < 0.8 else "End-user",
            "action": str(rng.choice(ACTIONS)),
            # the PII class leans on one categorical feature so classifiers have signal
            "confidentiality": ("Personal" if rng.random() < 0.85 else "Internal") if pii
            else ("Personal" if rng.random() < 0.05 else str(rng.choice(["Internal", "Credentials", "Bank"]))),
            "integrity": str(rng.choice(["Software installation", "Alter behavior", "Unknown"])),
            "year": str(year),
            "incident_month": str(month),
            "incident_quarter": str((month - 1) // 3 + 1),
            "reference_date": f"{year}-{month:02d}-15",
            "incident_month_name": MONTH_NAMES[month - 1],
            "reference": f"https://example.org/incident/{i}",
        }
        # sprinkle missing optional fields; they are imputed, not dropped
        if rng.random() < 0.1:
            row["incident_month"] = ""
            row["incident_quarter"] = ""
            row["incident_month_name"] = ""
        if rng.random() < 0.1:
            row["state"] = "NaN"
        if kind == "no_action":
            row["action"] = ""
        if kind == "no_year":
            row["year"] = "nan"
        month_known = row["incident_month"] != ""
        drop = {"no_action": "missing_action", "no_year": "missing_year", "other": "not_ecommerce"}.get(kind)
        expect.append({
            "incident_id": row["incident_id"],
            "retained": drop is None,
            "drop_reason": drop,
            "keyword_count": n_threat,
            "risk_terms_score": int(sum(RISK[t] for t in risk_terms)),
            "contains_pii_terms": pii,
            "year": year,
            "incident_month": month if month_known else -1,
            "is_holiday_month": holiday and month_known,
        })
        rows.append(row)
    return rows, expect


def to_csv(rows) -> bytes:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\r\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def summarize(expect) -> dict:
    kept = [e for e in expect if e["retained"]]
    dropped = {}
    for e in expect:
        if e["drop_reason"]:
            dropped[e["drop_reason"]] = dropped.get(e["drop_reason"], 0) + 1
    pos = sum(e["contains_pii_terms"] for e in kept)
    return {
        "input_count": len(expect),
        "retained_count": len(kept),
        "dropped": dict(sorted(dropped.items())),
        "target_counts": {"0": len(kept) - pos, "1": pos},
        "years": sorted({e["year"] for e in kept}),
    }


def main(out_dir: Path = HERE) -> None:
    manifest = {"seed": SEED, "generator": "fixtures/generate.py", "fixtures": {}}
    for name, n, seed in (("incidents_20.csv", 20, SEED), ("incidents_400.csv", 400, SEED + 1)):
        rows, expect = make_rows(n, seed)
        (out_dir / name).write_bytes(to_csv(rows))
        manifest["fixtures"][name] = {**summarize(expect), "rows": expect}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE)
