"""Engineered threat features derived from imputed incident records."""
from __future__ import annotations

import json
import re
import statistics
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, DomainError
from .ingest import IncidentRecord

# Evaluated in order; the first group with a keyword contained in the action wins.
ACTION_GROUPS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("hacking", (
        "hack", "brute", "sqli", "xss", "buffer", "overflow",
        "rfi", "os commanding", "session fixation", "session prediction",
        "reverse engineering", "path traversal", "exploit vuln",
        "exploit misconfig", "forced browsing", "ssi injection",
        "evade defenses", "dos",
    )),
    ("malware", ("malware", "ransomware", "virus")),
    ("phishing", ("phish", "spoof", "url redirector")),
    ("misuse", ("misuse", "unauthorised", "abuse of functionality")),
    ("error", ("error", "misconfiguration")),
    ("physical", ("physical", "device", "lost")),
    ("unknown", ("unknown",)),
    ("social", ("social", "engineer", "aitm")),
    ("enviro", ("enviro", "natural")),
    ("tampering", ("tamper", "modification")),
    ("privilege", ("privilege", "use of stolen creds")),
    ("spam", ("spam", "junk")),
    ("data_leak", ("leak", "exfiltration")),
    ("theft", ("theft", "steal")),
)
ACTION_TYPES: tuple[str, ...] = tuple(name for name, _ in ACTION_GROUPS) + ("other",)

SEASONS = ("Winter", "Spring", "Summer", "Autumn", "Unknown")
_SEASON_BY_MONTH = {
    12: "Winter", 1: "Winter", 2: "Winter",
    3: "Spring", 4: "Spring", 5: "Spring",
    6: "Summer", 7: "Summer", 8: "Summer",
    9: "Autumn", 10: "Autumn", 11: "Autumn",
}
HOLIDAY_MONTHS = frozenset({6, 7, 11, 12})

SHORT_TERM_LEN = 3


@dataclass(frozen=True)
class Lexicon:
    threat_terms: tuple[str, ...]
    risk_weights: Mapping[str, int]
    pii_terms: tuple[str, ...]
    version: int | None = None

    def __post_init__(self):
        for name, terms in (("threat_terms", self.threat_terms),
                            ("risk_weights", tuple(self.risk_weights)),
                            ("pii_terms", self.pii_terms)):
            if len(set(terms)) != len(terms):
                raise ConfigError(f"lexicon {name} contains duplicates")
            for t in terms:
                if not t or t != t.lower():
                    raise ConfigError(f"lexicon {name} term {t!r} must be non-empty and lowercase")
        for t, w in self.risk_weights.items():
            if not isinstance(w, int) or w <= 0:
                raise ConfigError(f"risk weight for {t!r} must be a positive integer")

    @classmethod
    def from_dict(cls, d: Mapping) -> "Lexicon":
        try:
            return cls(tuple(d["threat_terms"]), dict(d["risk_weights"]), tuple(d["pii_terms"]), d.get("version"))
        except KeyError as exc:
            raise ConfigError(f"lexicon is missing {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def default(cls) -> "Lexicon":
        text = resources.files("breachlens").joinpath("data/lexicon.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "threat_terms": list(self.threat_terms),
            "risk_weights": dict(self.risk_weights),
            "pii_terms": list(self.pii_terms),
        }


def _normalize(text: str | None) -> str:
    return re.sub(r"\s+", " ", text or "").strip().lower()


def _term_positions(text: str, term: str) -> list[int]:
    """Start offsets of non-overlapping occurrences of ``term`` in normalised text.

    Short terms must stand as whole tokens; longer ones match as substrings.
    """
    term = _normalize(term)
    if len(term) <= SHORT_TERM_LEN:
        pattern = r"(?<![a-z0-9])" + re.escape(term) + r"(?![a-z0-9])"
    else:
        pattern = re.escape(term)
    return [m.start() for m in re.finditer(pattern, text)]


def classify_action_type(action: str | None) -> str:
    action = str(action or "").lower()
    for name, keywords in ACTION_GROUPS:
        if any(kw in action for kw in keywords):
            return name
    return "other"


def count_threat_keywords(summary: str, lexicon: Lexicon) -> tuple[int, list[str]]:
    text = _normalize(summary)
    total = 0
    first_seen = []
    for order, term in enumerate(lexicon.threat_terms):
        pos = _term_positions(text, term)
        if pos:
            total += len(pos)
            first_seen.append((pos[0], order, term))
    return total, [term for _, _, term in sorted(first_seen)]


def score_risk_terms(summary: str, lexicon: Lexicon) -> int:
    text = _normalize(summary)
    return sum(w * len(_term_positions(text, t)) for t, w in lexicon.risk_weights.items())


def detect_pii(summary: str, lexicon: Lexicon) -> bool:
    text = _normalize(summary)
    return any(_term_positions(text, t) for t in lexicon.pii_terms)


def season_of(month: int) -> str:
    if month == -1:
        return "Unknown"
    try:
        return _SEASON_BY_MONTH[month]
    except (KeyError, TypeError):
        raise DomainError(f"month must be -1 or 1..12, got {month!r}") from None


def is_holiday_month(month: int, holiday_months: Iterable[int] = HOLIDAY_MONTHS) -> bool:
    return month in set(holiday_months)


def flag_high_severity(scores: list[int]) -> list[bool]:
    """Flag scores strictly above the cohort median."""
    if not scores:
        raise DomainError("cannot flag severity of an empty cohort")
    med = statistics.median(scores)
    return [s > med for s in scores]


@dataclass
class EngineeredIncident:
    base: IncidentRecord
    action_type: str
    summary_length: int
    keyword_count: int
    matched_threat_keywords: list[str]
    risk_terms_score: int
    threat_enrichment_score: int
    severity_score: int
    contains_pii_terms: bool
    season: str
    is_holiday_month: bool
    high_severity: bool = False

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        for k, v in asdict(self).items():
            if k != "base":
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "EngineeredIncident":
        base = IncidentRecord.from_dict(d)
        kw = {k: d[k] for k in _ENGINEERED_FIELDS}
        kw["matched_threat_keywords"] = list(kw["matched_threat_keywords"])
        return cls(base=base, **kw)

    def get(self, name: str):
        """Look a column up on the engineered fields first, then the base record."""
        if name in _ENGINEERED_FIELDS:
            return getattr(self, name)
        if hasattr(self.base, name) and name != "extra":
            return getattr(self.base, name)
        return self.base.extra.get(name)


_ENGINEERED_FIELDS = (
    "action_type", "summary_length", "keyword_count", "matched_threat_keywords",
    "risk_terms_score", "threat_enrichment_score", "severity_score",
    "contains_pii_terms", "season", "is_holiday_month", "high_severity",
)


def engineer_one(record: IncidentRecord, lexicon: Lexicon,
                 holiday_months: Iterable[int] = HOLIDAY_MONTHS) -> EngineeredIncident:
    count, matched = count_threat_keywords(record.summary, lexicon)
    risk = score_risk_terms(record.summary, lexicon)
    enrichment = count + risk
    return EngineeredIncident(
        base=record,
        action_type=classify_action_type(record.action),
        summary_length=len(record.summary),
        keyword_count=count,
        matched_threat_keywords=matched,
        risk_terms_score=risk,
        threat_enrichment_score=enrichment,
        severity_score=enrichment,
        contains_pii_terms=detect_pii(record.summary, lexicon),
        season=season_of(record.incident_month),
        is_holiday_month=is_holiday_month(record.incident_month, holiday_months),
    )


def engineer(records: list[IncidentRecord], lexicon: Lexicon | None = None,
             holiday_months: Iterable[int] = HOLIDAY_MONTHS) -> list[EngineeredIncident]:
    lexicon = lexicon or Lexicon.default()
    holiday_months = frozenset(holiday_months)
    out = [engineer_one(r, lexicon, holiday_months) for r in records]
    if out:
        for inc, flag in zip(out, flag_high_severity([e.severity_score for e in out])):
            inc.high_severity = flag
    return out
