"""Output writers: JSON and CSV with every float at 17 significant digits.

Non-finite floats are written as the strings "inf", "-inf" and "nan" so the
JSON stays standard.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj):
    """Convert numpy containers and scalars to plain Python objects."""
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def _write(obj, out: list, indent: int | None, level: int) -> None:
    obj = _plain(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        s = format_float(obj)
        out.append(s if math.isfinite(obj) else json.dumps(s))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append((sep if i else "") + pad + json.dumps(str(k)) + ": ")
            _write(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append((sep if i else "") + pad)
            _write(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    out: list[str] = []
    _write(obj, out, indent, 0)
    return "".join(out)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def _decode_special(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, list):
        return [_decode_special(v) for v in x]
    if isinstance(x, dict):
        return {k: _decode_special(v) for k, v in x.items()}
    return x


def loads(text: str):
    """Inverse of dumps, turning the non-finite marker strings back into floats."""
    return _decode_special(json.loads(text))


def write_jsonl(path, records) -> None:
    Path(path).write_text("".join(dumps(r, indent=None) + "\n" for r in records))


def _cell(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return format_float(v)
    if v is None:
        return ""
    return str(v)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(h) for h in header]
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: list[str], rows) -> None:
    Path(path).write_text(csv_text(header, rows))
