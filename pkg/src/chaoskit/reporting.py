"""Check records and report emission.

Reports are append-only: every run gets a fresh timestamped directory and
nothing inside an existing run directory is ever rewritten.  The report
files themselves (report.jsonl, report.csv, manifest.json) are byte-stable
for a fixed config and seed; wall-clock data lives in timing.jsonl only, so
identical runs can be diffed file by file.

Complex values are serialized as "re+imi" with full-precision float reprs;
parse_value is the reference parser and round-trips everything format_value
emits.
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

from ._version import __version__

__all__ = [
    "REPORT_FORMAT",
    "CheckRecord",
    "emit_report",
    "format_value",
    "make_run_dir",
    "parse_value",
    "read_report_csv",
    "summary_line",
]

REPORT_FORMAT = 1

_CSV_COLUMNS = ("check_id", "status", "value", "expected", "tolerance", "se", "note")


@dataclass
class CheckRecord:
    check_id: str
    status: str
    value: complex | float
    expected: complex | float
    tolerance: float
    se: float | None = None
    runtime_ms: float = 0.0
    note: str = ""

    def __post_init__(self):
        if self.status not in ("pass", "fail"):
            raise ValueError(f"status must be pass or fail, got {self.status!r}")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def row(self) -> dict:
        """Deterministic payload: runtime_ms is deliberately excluded."""
        return {
            "check_id": self.check_id,
            "status": self.status,
            "value": format_value(self.value),
            "expected": format_value(self.expected),
            "tolerance": self.tolerance,
            "se": self.se,
            "note": self.note,
        }


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, complex) and not isinstance(v, float):
        z = complex(v)
        sign = "+" if z.imag >= 0 else "-"
        return f"{z.real!r}{sign}{abs(z.imag)!r}i"
    return repr(float(v))


def parse_value(s: str):
    if s == "":
        return None
    if not s.endswith("i"):
        return float(s)
    body = s[:-1]
    cuts = [i for i in range(1, len(body)) if body[i] in "+-" and body[i - 1] not in "eE"]
    if len(cuts) != 1:
        raise ValueError(f"malformed complex literal {s!r}")
    cut = cuts[0]
    return complex(float(body[:cut]), float(body[cut:]))


def summary_line(records) -> str:
    n_pass = sum(1 for r in records if r.passed)
    return f"{n_pass}/{len(records)} pass"


def make_run_dir(base: str) -> str:
    os.makedirs(base, exist_ok=True)
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    candidate = os.path.join(base, f"run-{stamp}")
    suffix = 0
    while os.path.exists(candidate):
        suffix += 1
        candidate = os.path.join(base, f"run-{stamp}-{suffix}")
    os.makedirs(candidate)
    return candidate


def emit_report(records, run_dir: str, manifest: dict) -> str:
    """Write report.jsonl, report.csv, manifest.json, timing.jsonl.

    Returns the summary line.  `manifest` carries suite/config/hash fields;
    counts and format markers are filled in here.
    """
    rows = [r.row() for r in records]
    with open(os.path.join(run_dir, "report.jsonl"), "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    with open(os.path.join(run_dir, "report.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["tolerance"] = format_value(out["tolerance"])
            out["se"] = "" if out["se"] is None else format_value(out["se"])
            writer.writerow(out)

    full = dict(manifest)
    full.update(
        {
            "artifact": "chaoskit",
            "version": __version__,
            "report_format": REPORT_FORMAT,
            "records": len(records),
            "passed": sum(1 for r in records if r.passed),
            "failed": sum(1 for r in records if not r.passed),
        }
    )
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(full, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(run_dir, "timing.jsonl"), "w") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {"check_id": r.check_id, "runtime_ms": round(r.runtime_ms, 3)},
                    sort_keys=True,
                )
                + "\n"
            )
    return summary_line(records)


def read_report_csv(path: str) -> list[dict]:
    """Round-trip reader for report.csv; values come back as numbers."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = dict(row)
            for key in ("value", "expected", "tolerance", "se"):
                parsed[key] = parse_value(row[key])
            out.append(parsed)
    return out
