"""CSV/JSON output with a ``#``-prefixed metadata header."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def format_csv(columns, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key} = {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(out, columns, rows, meta: dict | None = None) -> str:
    """Write to a path or an open text stream; returns the text written."""
    text = format_csv(columns, rows, meta)
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text)
    return text


def write_json(path, columns, rows, meta: dict | None = None):
    doc = {"meta": meta or {}, "rows": [{c: row[c] for c in columns} for row in rows]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
