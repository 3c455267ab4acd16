"""Plain CSV tables: floats at 6 significant digits, UTF-8, LF line endings."""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path

METRICS_HEADER = ["l1x", "l1y", "l2x", "l2y", "m_l", "m_ci", "g1", "g2", "g3", "g4"]
TRAINING_HEADER = ["l1x", "l1y", "l2x", "l2y", "method", "seed", "evals_to_success", "censored", "best_loss"]
CORRELATION_HEADER = ["metric", "method", "r", "p", "n"]
COOPT_RUN_HEADER = ["eval_index", "best_success_count", "dtw_score", "success_count",
                    "archive_accepted", "incumbent_id"]
COOPT_SUMMARY_HEADER = ["seed", "mode", "final_sum", "final_success_count",
                        "l1x", "l1y", "l2x", "l2y", "w1", "w2"]


class TableError(ValueError):
    pass


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        v = float(value)
        if v.is_integer() and hasattr(value, "dtype") and value.dtype.kind in "iub":
            return str(int(v))
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}"
    return str(value)


def parse(text):
    """Inverse of :func:`fmt` for a single field: int, float, None or str."""
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path, header, rows):
    """Write atomically (temp file then rename) so readers never see half a table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise TableError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([fmt(v) for v in row])
    os.replace(tmp, path)


def read_csv(path, header=None):
    """(header, rows) with every field parsed; checks the header when given."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise TableError(f"{path} is empty") from None
        if header is not None and got != list(header):
            raise TableError(f"{path}: expected columns {header}, found {got}")
        rows = []
        for line in reader:
            if len(line) != len(got):
                raise TableError(f"{path}: ragged row {reader.line_num}")
            rows.append([parse(v) for v in line])
    return got, rows
