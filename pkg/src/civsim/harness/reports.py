"""Tabular reports written as CSV and JSON.

Both encodings are canonical: parsing an emitted report and emitting it
again gives the same bytes. Floats use ``repr``, missing values are empty
CSV cells / JSON null, booleans are ``true``/``false``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA = "civsim.report/1"

BREAKDOWN_COLUMNS = ("verification_setup_ms", "challenge_transmit_ms", "response_setup_ms", "response_transmit_ms")

COLUMNS = {
    "run": ("row", "seed", "caller", "callee", "variant", "outcome", "warning", "total_ms", *BREAKDOWN_COLUMNS,
            "call_setups", "success_rate"),
    "sweep-n": ("caller", "callee", "n", "transmission_ms", "slope_ms_per_digit", "intercept_ms", "r_squared"),
    "sweep-markspace": ("mark_ms", "space_ms", "trials", "successes", "success_rate", "snr_db"),
    "attack": ("strategy", "trials", "seed", "n_digits", "verified", "not_verified", "not_attempted", "rang",
               "warnings", "rate", "expected_rate", "ci_low", "ci_high", "z_score", "victim_missed_calls",
               "victim_filtered", "reflected_calls", "cdr_pairs", "cdr_unmatched", "cdr_attributed_to_attacker",
               "wall_violations"),
    "fit": ("target", "caller", "callee", "variant", "target_ms", "simulated_ms", "residual"),
}


# every other column is numeric
TEXT_COLUMNS = frozenset({"row", "caller", "callee", "variant", "outcome", "warning", "strategy", "target"})


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in TEXT_COLUMNS:
        return text
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return float(text)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


@dataclass
class Report:
    kind: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple:
        return COLUMNS[self.kind]

    def add(self, **values):
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown {self.kind} columns {sorted(unknown)}")
        for c, v in values.items():
            if isinstance(v, str) and any(unicodedata.category(ch) == "Cc" for ch in v):
                raise ValueError(f"control character in {self.kind} column {c!r}")
        # an empty text cell and a missing one are the same thing
        self.rows.append({c: None if values.get(c) == "" else values.get(c) for c in self.columns})

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema": SCHEMA,
            "kind": self.kind,
            "columns": list(self.columns),
            "rows": [[_json_value(row[c]) for c in self.columns] for row in self.rows],
            "meta": self.meta,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, kind: str, text: str, meta: dict | None = None) -> Report:
        reader = csv.reader(io.StringIO(text, newline=""))
        header = next(reader)
        if tuple(header) != COLUMNS[kind]:
            raise ValueError(f"unexpected {kind} columns {header}")
        rep = cls(kind, meta=meta or {})
        for cells in reader:
            rep.rows.append({c: _parse_cell(c, v) for c, v in zip(header, cells)})
        return rep

    @classmethod
    def from_json(cls, text: str) -> Report:
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"not a {SCHEMA} document")
        rep = cls(doc["kind"], meta=doc.get("meta", {}))
        if tuple(doc["columns"]) != rep.columns:
            raise ValueError("column set does not match report kind")
        for values in doc["rows"]:
            rep.rows.append(dict(zip(rep.columns, values)))
        return rep

    def write(self, out) -> list[Path]:
        """Write ``<out>.csv`` and ``<out>.json`` (a trailing suffix on ``out`` is dropped)."""
        out = Path(out)
        if out.suffix in (".csv", ".json"):
            out = out.with_suffix("")
        out.parent.mkdir(parents=True, exist_ok=True)
        paths = [out.with_name(out.name + ".csv"), out.with_name(out.name + ".json")]
        paths[0].write_text(self.to_csv())
        paths[1].write_text(self.to_json())
        return paths
