"""Parsing, imputation and e-commerce filtering of raw breach records."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import IO, Iterable, Mapping

from .errors import ConfigError, ParseError

RawRecord = dict[str, "str | None"]

ECOMMERCE_PREFIXES: tuple[str, ...] = (
    "44", "441", "442", "443", "4431", "444", "445", "446", "447", "448",
    "451", "452", "453", "454", "4541", "45411", "454110", "454112",
    "454113",
    "48", "49", "51", "518", "5191", "51913", "519130", "519190",
    "541", "5415", "54151", "541511", "541512",
)

ECOMMERCE_CODES: dict[str, str] = {
    "454110": "Electronic Shopping",
    "454112": "Electronic Auctions",
    "454113": "Mail-Order Houses",
    "443142": "Electronics Stores",
    "4541": "General E-Commerce",
    "519130": "Internet Publishing & Platforms",
    "541511": "Web App Development",
    "541512": "System Design for E-Commerce",
    "518210": "Cloud & Hosting Services",
    "519190": "Other Info Services",
}

ECOMMERCE_KEYWORDS: tuple[str, ...] = ("retail", "checkout", "shop", "e-commerce", "ecommerce")

UNKNOWN = "Unknown"
NO_SUMMARY = "No summary available"
NOT_AVAILABLE = "Not available"

_NAN_LIKE = {"", "nan", "NaN"}


@dataclass
class IncidentRecord:
    incident_id: str
    summary: str
    industry: str
    victim_id: str
    country: str
    state: str
    country_code: str
    region_group: str
    victim_sector: str
    actor_external: str
    actor_internal: str
    action: str
    confidentiality: str
    integrity: str
    year: int
    incident_month: int
    incident_quarter: int
    reference_date: str
    # columns outside the fixed schema, kept verbatim (imputed where the source tool imputed them)
    extra: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "IncidentRecord":
        kwargs = {f.name: d[f.name] for f in fields(cls) if f.name != "extra"}
        return cls(**kwargs)


RECORD_FIELDS: tuple[str, ...] = tuple(f.name for f in fields(IncidentRecord) if f.name != "extra")


@dataclass(frozen=True)
class EcommerceLabel:
    prefix_match: bool
    exact_code_name: str | None
    keyword_flag: bool

    @property
    def retained(self) -> bool:
        return self.prefix_match or self.keyword_flag


@dataclass
class IngestReport:
    input_count: int = 0
    retained_count: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "retained_count": self.retained_count,
            "dropped": dict(sorted(self.dropped.items())),
        }


# -- parsing -----------------------------------------------------------------

def parse_dataset(source: bytes | IO[bytes], format: str) -> list[RawRecord]:
    """Parse a CSV (with header) or JSON-lines byte stream into raw records.

    Empty CSV cells and JSON nulls become ``None``. Rows are numbered from 1,
    counting the CSV header as row 1 so that numbers match a text editor.
    """
    if format not in ("csv", "jsonl", "json-lines"):
        raise ConfigError(f"unknown input format {format!r}; expected 'csv' or 'jsonl'")
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    try:
        text = bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    if format == "csv":
        return _parse_csv(text)
    return _parse_jsonl(text)


def _parse_csv(text: str) -> list[RawRecord]:
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader)
    except StopIteration:
        return []
    except csv.Error as exc:
        raise ParseError(str(exc), row=1) from exc
    if len(set(header)) != len(header):
        dupes = sorted(k for k, n in Counter(header).items() if n > 1)
        raise ParseError(f"duplicate column names {dupes}", row=1)
    records = []
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise ParseError(str(exc), row=reader.line_num) from exc
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=reader.line_num)
        records.append({k: (v if v != "" else None) for k, v in zip(header, row)})
    return records


def _parse_jsonl(text: str) -> list[RawRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", row=lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", row=lineno)
        rec: RawRecord = {}
        for k, v in obj.items():
            if v is None:
                rec[k] = None
            elif isinstance(v, str):
                rec[k] = v
            elif isinstance(v, bool):
                rec[k] = "True" if v else "False"
            else:
                rec[k] = json.dumps(v) if isinstance(v, (list, dict)) else str(v)
        records.append(rec)
    return records


# -- normalisation and imputation ------------------------------------------

def is_nan_like(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float):
        return math.isnan(value)
    return str(value).strip() in _NAN_LIKE


def normalize_industry_code(code: str | None) -> str:
    if is_nan_like(code):
        return ""
    out = str(code)
    # repeat until stable so "0 0" cannot leave a fresh leading blank behind
    while True:
        nxt = out.strip().lstrip("0")
        if nxt == out:
            return out
        out = nxt


def _as_int(value, domain: range | None = None) -> int | None:
    if is_nan_like(value):
        return None
    try:
        f = float(str(value).strip())
    except ValueError:
        return None
    if not math.isfinite(f) or f != int(f):
        return None
    i = int(f)
    if domain is not None and i not in domain:
        return None
    return i


_STRING_DEFAULTS = {
    "incident_id": UNKNOWN,
    "summary": NO_SUMMARY,
    "victim_id": UNKNOWN,
    "country": UNKNOWN,
    "state": UNKNOWN,
    "country_code": UNKNOWN,
    "region_group": UNKNOWN,
    "victim_sector": UNKNOWN,
    "actor_external": UNKNOWN,
    "actor_internal": UNKNOWN,
    "confidentiality": UNKNOWN,
    "integrity": UNKNOWN,
    "reference_date": UNKNOWN,
}

_EXTRA_DEFAULTS = {
    "incident_month_name": UNKNOWN,
    "victim_id.1": UNKNOWN,
    "reference": NOT_AVAILABLE,
}


def impute(raw: Mapping[str, object]) -> IncidentRecord | str:
    """Fill missing fields with placeholders.

    Returns the imputed record, or a drop reason string when ``action`` or
    ``year`` is missing. Already-imputed input passes through unchanged.
    """
    if isinstance(raw, IncidentRecord):
        raw = {**raw.to_dict(), **raw.extra}
    action_missing = is_nan_like(raw.get("action"))
    year = _as_int(raw.get("year"))
    if action_missing and year is None:
        return "missing_action_and_year"
    if action_missing:
        return "missing_action"
    if year is None:
        return "missing_year"

    values: dict[str, object] = {}
    for name, default in _STRING_DEFAULTS.items():
        v = raw.get(name)
        values[name] = default if is_nan_like(v) else str(v)
    values["action"] = str(raw["action"])
    values["industry"] = normalize_industry_code(raw.get("industry"))
    values["year"] = year
    month = _as_int(raw.get("incident_month"), range(1, 13))
    quarter = _as_int(raw.get("incident_quarter"), range(1, 5))
    values["incident_month"] = -1 if month is None else month
    values["incident_quarter"] = -1 if quarter is None else quarter

    extra = {}
    for k, v in raw.items():
        if k in RECORD_FIELDS:
            continue
        if is_nan_like(v) and k in _EXTRA_DEFAULTS:
            extra[k] = _EXTRA_DEFAULTS[k]
        elif v is not None:
            extra[k] = str(v)
    return IncidentRecord(**values, extra=extra)


# -- e-commerce labelling ----------------------------------------------------

def _normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().lower()


def classify_ecommerce(
    record: IncidentRecord,
    prefixes: Iterable[str] = ECOMMERCE_PREFIXES,
    exact_codes: Mapping[str, str] = ECOMMERCE_CODES,
    keywords: Iterable[str] = ECOMMERCE_KEYWORDS,
) -> EcommerceLabel:
    code = record.industry
    prefix_match = bool(code) and any(code.startswith(p) for p in prefixes)
    haystack = _normalize_text(f"{record.victim_id} {record.summary}")
    keyword_flag = any(_normalize_text(k) in haystack for k in keywords)
    return EcommerceLabel(prefix_match, exact_codes.get(code), keyword_flag)


def filter_ecommerce(
    records: list[IncidentRecord],
    prefixes: Iterable[str] = ECOMMERCE_PREFIXES,
    exact_codes: Mapping[str, str] = ECOMMERCE_CODES,
    keywords: Iterable[str] = ECOMMERCE_KEYWORDS,
) -> tuple[list[IncidentRecord], IngestReport]:
    prefixes, keywords = tuple(prefixes), tuple(keywords)
    kept = [r for r in records if classify_ecommerce(r, prefixes, exact_codes, keywords).retained]
    dropped = len(records) - len(kept)
    report = IngestReport(len(records), len(kept), {"not_ecommerce": dropped} if dropped else {})
    return kept, report


def ingest(source: bytes | IO[bytes], format: str, **filter_kwargs) -> tuple[list[IncidentRecord], IngestReport]:
    """Parse, impute and filter in one pass; the report covers every stage."""
    raw = parse_dataset(source, format)
    imputed, reasons = [], Counter()
    for rec in raw:
        out = impute(rec)
        if isinstance(out, str):
            reasons[out] += 1
        else:
            imputed.append(out)
    kept, filt = filter_ecommerce(imputed, **filter_kwargs)
    reasons.update(filt.dropped)
    return kept, IngestReport(len(raw), len(kept), dict(reasons))


def write_jsonl(rows: Iterable[Mapping], fh: IO[str]) -> None:
    for row in rows:
        fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
        fh.write("\n")


def read_incidents(fh: IO[str]) -> list[IncidentRecord]:
    return [IncidentRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
