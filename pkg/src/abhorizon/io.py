"""Readers and writers for the CSV and JSON files used by the CLI.

All text output is UTF-8 with LF newlines.  Floats are written with Python's
shortest round-trip representation, so reading a file back recovers every
value bit for bit.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import warnings
from collections.abc import Sequence
from pathlib import Path
from typing import IO

import numpy as np

from .bench import AccuracyReport
from .data import FreqSpectrum, TriggerData
from .errors import DataError
from .fit import FitResult
from .model import ForecastReport, HyperParams

LONG_HEADER = ("day", "user", "count")
AGGREGATE_HEADER = ("day", "new_users")


def _rows(path, header: tuple[str, ...]):
    """Yield ``(line_number, fields)`` after checking the exact header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(f.strip() for f in first) != header:
            raise DataError(f"{path}: line 1: header must be exactly {','.join(header)}")
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise DataError(
                    f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(fields)}"
                )
            yield reader.line_num, [f.strip() for f in fields]


def _parse_int(text: str, what: str, path, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}: line {line}: {what} must be an integer, got {text!r}") from None


def _day_indexer(raw_days: list[tuple[int, str]], path):
    """Map day fields to 1-based indices.  Either every day is an integer or
    every day is an ISO date; dates count from the earliest one."""
    if all(s.lstrip("-").isdigit() for _, s in raw_days):
        out = []
        for line, s in raw_days:
            d = int(s)
            if d < 1:
                raise DataError(f"{path}: line {line}: day must be >= 1, got {d}")
            out.append(d)
        return out
    dates = []
    for line, s in raw_days:
        try:
            dates.append(dt.date.fromisoformat(s))
        except ValueError:
            raise DataError(
                f"{path}: line {line}: day must be an integer or ISO date, got {s!r}"
            ) from None
    origin = min(dates)
    return [(d - origin).days + 1 for d in dates]


def parse_long_csv(path) -> TriggerData:
    """Read ``day,user,count`` rows.  Duplicate (day, user) rows are summed;
    zero counts are dropped with a warning."""
    rows = list(_rows(path, LONG_HEADER))
    days = _day_indexer([(line, f[0]) for line, f in rows], path)
    triples = []
    for (line, (_, user, count)), day in zip(rows, days):
        if not user:
            raise DataError(f"{path}: line {line}: empty user id")
        k = _parse_int(count, "count", path, line)
        if k < 0:
            raise DataError(f"{path}: line {line}: count must be >= 0, got {k}")
        triples.append((day, user, k))
    if not triples:
        return TriggerData.empty(0)
    n_days = max(d for d, _, _ in triples)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = TriggerData.from_entries(triples, days=n_days)
    for w in caught:
        warnings.warn(f"{path}: {w.message}", stacklevel=2)
    return data


def write_long_csv(data: TriggerData, dest: str | Path | IO[str]) -> None:
    """Canonical form: sorted by day, then user id."""
    rows = sorted(data.entries().items())
    _write_csv(dest, LONG_HEADER, ((d, u, k) for (d, u), k in rows))


def parse_aggregate_csv(path) -> np.ndarray:
    """Read ``day,new_users`` rows into the cumulative curve ``N_1..N_D``.

    Rows may come in any order; missing days count as zero arrivals and
    repeated days are summed.
    """
    rows = list(_rows(path, AGGREGATE_HEADER))
    days = _day_indexer([(line, f[0]) for line, f in rows], path)
    if not rows:
        raise DataError(f"{path}: no data rows")
    per_day = np.zeros(max(days), dtype=np.int64)
    for (line, (_, n)), day in zip(rows, days):
        k = _parse_int(n, "new_users", path, line)
        if k < 0:
            raise DataError(f"{path}: line {line}: new_users must be >= 0, got {k}")
        per_day[day - 1] += k
    return np.cumsum(per_day)


def _write_csv(dest, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_fmt(x) for x in row] for row in rows)
    _write_text(dest, buf.getvalue())


def _write_text(dest, text: str) -> None:
    if hasattr(dest, "write"):
        dest.write(text)
        return
    with open(dest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default, allow_nan=False) + "\n"


def write_params(result: FitResult | HyperParams, dest, **extra) -> None:
    """``extra`` keys (for example ``pilot_days``) are stored alongside."""
    body = result.to_dict() if isinstance(result, FitResult) else {**result.to_dict()}
    body.update(extra)
    _write_text(dest, dumps(body))


def read_params(path) -> HyperParams:
    try:
        with open(path, encoding="utf-8") as fh:
            body = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    try:
        return HyperParams.from_dict(body)
    except KeyError as exc:
        raise DataError(f"{path}: missing parameter {exc}") from None
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def write_forecast(report: ForecastReport, dest) -> None:
    _write_text(dest, dumps(report.to_dict()))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ""
    return str(x)


RESULT_COLUMNS = (
    "dataset",
    "method",
    "D0",
    "D1",
    "observed",
    "predicted",
    "v",
    "observed_total",
    "predicted_total",
    "v_tilde",
    "error",
)


def write_results_csv(
    reports: Sequence[AccuracyReport], dest, include_runtime: bool = False
) -> None:
    """One row per report; missing values are empty fields.  Wall-clock
    runtime is left out by default so the table is reproducible."""
    cols = RESULT_COLUMNS + (("runtime_ms",) if include_runtime else ())
    _write_csv(dest, cols, ([getattr(r, c) for c in cols] for r in reports))


def write_spectrum_csv(spectrum: FreqSpectrum, dest) -> None:
    _write_csv(dest, ("k", "phi"), sorted(spectrum.phi.items()))


def write_table(rows: Sequence[dict], dest) -> None:
    """Small CSV writer for script outputs (keys of the first row as header)."""
    if not rows:
        _write_text(dest, "")
        return
    cols = list(rows[0])
    _write_csv(dest, cols, ([r[c] for c in cols] for r in rows))
