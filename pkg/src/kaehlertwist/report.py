"""Machine-readable reports: one JSON document per run and per-check CSV files."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .checks import CheckRecord
from .scenario import RunResult

__all__ = ["check_filename", "emit_csv", "report_dict", "to_json", "write_json"]


def _record_dict(r: CheckRecord) -> dict:
    out = {
        "id": r.check_id,
        "anchor": r.anchor,
        "statistic": r.statistic,
        "reduce": r.reduce,
        "comparator": r.comparator,
        "tolerance": r.tolerance,
        "passed": r.passed,
        "diagnostic": r.diagnostic,
        "note": r.note,
        "points": len(r.residuals),
    }
    # failures carry the worst point; witnesses carry the point realising them
    if not r.passed or r.comparator == ">=":
        out["witness"] = r.witness.tolist()
    return out


def report_dict(result: RunResult) -> dict:
    rep = result.report
    return {
        "scenario": result.config.name,
        "passed": rep.passed,
        "failures": [r.check_id for r in rep.failures()],
        "metadata": rep.metadata,
        "flags": result.flags,
        "checks": [_record_dict(r) for r in rep.records],
    }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    """JSON with floats written as 17 significant digits; non-finite floats become null."""
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent, level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    return json.dumps(obj)


def to_json(result: RunResult, indent: int = 2) -> str:
    return _encode(_plain(report_dict(result)), indent, 0) + "\n"


def write_json(result: RunResult, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(to_json(result))
    return p


def check_filename(check_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", check_id) + ".csv"


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def emit_csv(result: RunResult, directory: str | Path) -> list[Path]:
    """One CSV per check (sample coordinates, residual, witness flag) plus ``summary.csv``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in result.report.records:
        pts = np.atleast_2d(r.points)
        res = np.asarray(r.residuals, float)
        vals = None if r.values is None else np.asarray(r.values, float).reshape(len(res), -1)[:, 0]
        wit = r.witness_index
        path = out / check_filename(r.check_id)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            header = ["index"] + [f"x{i}" for i in range(pts.shape[1])] + ["residual"]
            header += (["value"] if vals is not None else []) + ["witness"]
            w.writerow(header)
            for i, (p, v) in enumerate(zip(pts, res)):
                row = [i] + [_g17(c) for c in p] + [_g17(v)]
                row += ([_g17(vals[i])] if vals is not None else []) + [int(i == wit)]
                w.writerow(row)
        written.append(path)
    summary = out / "summary.csv"
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check_id", "statistic", "reduce", "comparator", "tolerance", "passed", "diagnostic", "anchor"])
        for r in result.report.records:
            w.writerow([r.check_id, _g17(r.statistic), r.reduce, r.comparator, _g17(r.tolerance),
                        int(r.passed), int(r.diagnostic), r.anchor])
    written.append(summary)
    return written
