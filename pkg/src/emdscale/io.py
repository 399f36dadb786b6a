"""Delimited-file ingestion and deterministic writers for tables, matrices and manifests."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from .exceptions import IngestionError
from .series import Signal

log = logging.getLogger(__name__)

Column = Union[int, str, None]


@dataclass(frozen=True)
class IngestionConfig:
    path: Union[str, Path]
    price_column: Column = None        # default: last column
    timestamp_column: Column = None    # default: no timestamps
    delimiter: str = ","
    apply_log: bool = True
    drop_nonpositive: bool = False
    header: Optional[bool] = None      # None: detect from the first row

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")
        if self.timestamp_column is not None and self.timestamp_column == self.price_column:
            raise ValueError("timestamp and price columns must differ")


@dataclass
class IngestionReport:
    rows_read: int = 0
    dropped_blank: int = 0
    dropped_nonpositive: int = 0
    modal_gap_seconds: Optional[float] = None
    n_gaps_off_mode: int = 0
    max_gap_seconds: Optional[float] = None
    warnings: List[str] = field(default_factory=list)


def _to_float(cell: str) -> Optional[float]:
    try:
        return float(cell)
    except ValueError:
        return None


def parse_timestamp(cell: str) -> float:
    """Epoch seconds from an integer/decimal epoch or an ISO-8601 string (naive means UTC)."""
    cell = cell.strip()
    v = _to_float(cell)
    if v is not None:
        return v
    text = cell[:-1] + "+00:00" if cell.endswith(("Z", "z")) else cell
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _resolve(col: Column, header: Optional[List[str]], width: int, what: str) -> int:
    if isinstance(col, str) and col.lstrip("-").isdigit():
        col = int(col)
    if isinstance(col, int):
        idx = col if col >= 0 else width + col
        if not 0 <= idx < width:
            raise IngestionError(f"{what} column index {col} out of range for {width} columns")
        return idx
    if header is None:
        raise IngestionError(f"{what} column {col!r} given by name but the file has no header row")
    names = [h.strip() for h in header]
    if col not in names:
        raise IngestionError(f"{what} column {col!r} not found in header {names}")
    return names.index(col)


def modal_gap(timestamps: np.ndarray) -> tuple[Optional[float], int, Optional[float]]:
    """(modal gap, number of gaps differing from it, largest gap). Ties pick the smallest gap."""
    if timestamps.shape[0] < 2:
        return None, 0, None
    gaps = np.diff(timestamps)
    values, counts = np.unique(gaps, return_counts=True)
    mode = float(values[np.argmax(counts)])
    return mode, int(np.count_nonzero(gaps != mode)), float(gaps.max())


def ingest(cfg: IngestionConfig) -> tuple[Signal, IngestionReport]:
    """Read one price column (optionally with timestamps) into a Signal, in file row order."""
    path = Path(cfg.path)
    report = IngestionReport()
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter=cfg.delimiter)]
    except OSError as exc:
        raise IngestionError(f"{path}: {exc.strerror or exc}") from exc
    except csv.Error as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    while rows and not any(c.strip() for c in rows[0]):
        rows.pop(0)
    if not rows:
        raise IngestionError(f"{path}: file is empty")

    width = len(rows[0])
    price_col = -1 if cfg.price_column is None else cfg.price_column
    has_header = cfg.header
    if has_header is None:
        # a header is present when the first row's price cell is not numeric
        named = isinstance(price_col, str) and not price_col.lstrip("-").isdigit()
        has_header = named or _to_float(rows[0][_resolve(price_col, None, width, "price")]) is None
    header_row = rows[0] if has_header else None
    first = 1 if has_header else 0

    p_idx = _resolve(price_col, header_row, width, "price")
    t_idx = None
    if cfg.timestamp_column is not None:
        t_idx = _resolve(cfg.timestamp_column, header_row, width, "timestamp")
        if t_idx == p_idx:
            raise IngestionError("timestamp and price columns resolve to the same column")

    prices, stamps = [], []
    for lineno, row in enumerate(rows[first:], start=first + 1):
        report.rows_read += 1
        if not any(c.strip() for c in row):
            report.dropped_blank += 1
            continue
        if p_idx >= len(row):
            raise IngestionError(f"{path}: row {lineno} has {len(row)} fields, price column is {p_idx}")
        cell = row[p_idx].strip()
        if cell == "":
            report.dropped_blank += 1
            continue
        p = _to_float(cell)
        if p is None or not math.isfinite(p):
            raise IngestionError(f"{path}: row {lineno}: cannot parse price {cell!r}")
        if cfg.apply_log and p <= 0:
            if not cfg.drop_nonpositive:
                raise IngestionError(f"{path}: row {lineno}: non-positive price {p!r} cannot be log-transformed")
            report.dropped_nonpositive += 1
            continue
        if t_idx is not None:
            if t_idx >= len(row) or not row[t_idx].strip():
                raise IngestionError(f"{path}: row {lineno}: missing timestamp")
            try:
                stamps.append(parse_timestamp(row[t_idx]))
            except ValueError as exc:
                raise IngestionError(f"{path}: row {lineno}: cannot parse timestamp {row[t_idx]!r}") from exc
        prices.append(p)

    if report.dropped_blank:
        report.warnings.append(f"dropped {report.dropped_blank} rows with a blank price")
    if report.dropped_nonpositive:
        report.warnings.append(f"dropped {report.dropped_nonpositive} rows with a non-positive price")
    if len(prices) < 3:
        raise IngestionError(f"{path}: only {len(prices)} usable rows")

    values = np.log(np.array(prices)) if cfg.apply_log else np.array(prices)
    interval = None
    if stamps:
        ts = np.array(stamps)
        bad = np.flatnonzero(np.diff(ts) <= 0)
        if bad.size:
            raise IngestionError(f"{path}: timestamps not strictly increasing near data row {bad[0] + 2}")
        interval, off, biggest = modal_gap(ts)
        report.modal_gap_seconds, report.n_gaps_off_mode, report.max_gap_seconds = interval, off, biggest
        if off:
            report.warnings.append(
                f"{off} gaps differ from the modal interval {interval:g}s (largest {biggest:g}s); not resampled"
            )
    for w in report.warnings:
        log.warning("%s: %s", path.name, w)
    return Signal(values, interval, path.stem), report


# writers ----------------------------------------------------------------------


def fmt_full(v: Any) -> str:
    """Round-trip decimal text (17 significant digits) for floats."""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def fmt_short(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        # three decimals, unless that would print a nonzero value as 0.000
        return "%.3e" % v if 0 < abs(v) < 5e-4 else "%.3f" % v
    return str(v)


def write_delimited(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], delimiter: str = ",") -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_full(v) for v in row])
    return path


def write_text_table(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    cells = [list(header)] + [[fmt_short(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, Path):
        return str(v)
    return v


def write_json(path: Path, obj: Any) -> Path:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


TABLE_FORMATS = ("delimited", "text-table", "structured")
TABLE_SUFFIX = {"delimited": ".csv", "text-table": ".txt", "structured": ".json"}


def write_table(stem: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> Path:
    """Write a table as ``stem`` plus the format's suffix."""
    path = stem.with_suffix(TABLE_SUFFIX[fmt])
    if fmt == "delimited":
        return write_delimited(path, header, rows)
    if fmt == "text-table":
        return write_text_table(path, header, rows)
    if fmt == "structured":
        return write_json(path, [dict(zip(header, row)) for row in rows])
    raise ValueError(f"unknown table format {fmt!r}")


def write_matrix(stem: Path, labels: Sequence[str], matrix: np.ndarray, binary: bool = False) -> Path:
    """Components as columns. Binary output is a float64 ``.npy`` array of shape (T, n_components)."""
    cols = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64).T)
    if binary:
        path = stem.with_suffix(".npy")
        np.save(path, cols)
        return path
    return write_delimited(stem.with_suffix(".csv"), labels, cols.tolist())


def read_matrix(path: Union[str, Path]) -> tuple[list[str], np.ndarray]:
    """Inverse of :func:`write_matrix` for delimited output; returns (labels, columns-as-rows)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=np.float64).T
