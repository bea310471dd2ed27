"""Report records: JSON conversion and text rendering."""
from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Any

import numpy as np

REPORT_SCHEMA = "martrep.report/1"


def jsonable(x: Any) -> Any:
    """Recursively convert Fractions, numpy values and infinities to JSON types.

    Fractions with denominator 1 become ints, others strings like "3/7";
    infinities become "inf"/"-inf"; NaN becomes None.
    """
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()] if x.dtype != object else [jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        seq = sorted(x, key=repr) if isinstance(x, (set, frozenset)) else x
        return [jsonable(v) for v in seq]
    if hasattr(x, "record"):
        return jsonable(x.record())
    if x is None or isinstance(x, str):
        return x
    return str(x)


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=False) + "\n"


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)) and len(v) > 8:
        return "[" + ", ".join(_fmt(x) for x in v[:8]) + ", ...]"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def render_text(report: dict, indent: int = 0) -> str:
    """Indented key: value listing of a (jsonable) report."""
    lines = []
    pad = "  " * indent
    for k, v in report.items():
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(render_text(v, indent + 1))
        elif isinstance(v, list) and v and all(isinstance(r, dict) for r in v):
            lines.append(f"{pad}{k}:")
            for r in v:
                lines.append(pad + "  - " + ", ".join(f"{a}={_fmt(b)}" for a, b in r.items()))
        else:
            lines.append(f"{pad}{k}: {_fmt(v)}")
    return "\n".join(line for line in lines if line)


def table_csv(rows: list[dict]) -> str:
    """CSV with a header row taken from the union of keys, in first-seen order."""
    if not rows:
        return ""
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    import csv
    import io
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: jsonable(v) for k, v in r.items()})
    return buf.getvalue()
