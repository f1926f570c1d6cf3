"""Report files: records.csv, summary.json, and the timing sidecar.

records.csv and summary.json are deterministic functions of the spec
and master seed, so re-running an experiment reproduces them byte for
byte. Wall times go to timings.csv, which is expected to differ.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np


def wilson_ci(successes: int, total: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total == 0:
        return 0.0, 1.0
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2.0 * total)) / denom
    half = (z / denom) * math.sqrt(
        p * (1.0 - p) / total + z * z / (4.0 * total * total)
    )
    return max(0.0, center - half), min(1.0, center + half)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        # 17 significant digits round-trips every IEEE double exactly.
        return format(float(value), ".17g")
    return str(value)


def _parsers():
    # Built lazily to avoid a circular import at module load.
    from .experiment import TrialRecord

    def parse(kind: str, text: str):
        optional = kind.endswith("| None")
        base = kind.split(" | ")[0].strip()
        if text == "":
            if optional:
                return None
            raise ValueError(f"empty field for required {base}")
        if base == "bool":
            return text == "1"
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
        return text

    kinds = {f.name: f.type for f in dataclasses.fields(TrialRecord)}
    return TrialRecord, kinds, parse


def records_csv_text(records) -> str:
    """records.csv contents as a string."""
    from .experiment import TrialRecord

    names = [f.name for f in dataclasses.fields(TrialRecord)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for rec in records:
        writer.writerow([_format_value(getattr(rec, n)) for n in names])
    return buf.getvalue()


def summary_json_text(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def timings_csv_text(timings) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell", "trial", "seconds"])
    for cell, trial, seconds in timings:
        writer.writerow([cell, trial, format(seconds, ".6f")])
    return buf.getvalue()


def emit_report(records, summary: dict, timings, out_dir) -> dict[str, Path]:
    """Write the three report files into out_dir and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / "records.csv",
        "summary": out / "summary.json",
        "timings": out / "timings.csv",
    }
    paths["records"].write_text(records_csv_text(records), encoding="utf-8")
    paths["summary"].write_text(summary_json_text(summary), encoding="utf-8")
    paths["timings"].write_text(timings_csv_text(timings), encoding="utf-8")
    return paths


def read_records(path) -> list:
    """Load records.csv back into TrialRecord objects, exactly."""
    cls, kinds, parse = _parsers()
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            kwargs = {
                name: parse(kinds[name], text) for name, text in zip(header, row)
            }
            out.append(cls(**kwargs))
    return out
