"""CSV trace emission and JSON (de)serialization of set sequences."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .metric_sets import SetError, SetSequence, set_from_dict, set_to_dict

__all__ = [
    "TRACE_HEADER",
    "emit_trace_csv",
    "format_float",
    "sequence_to_json",
    "sequence_from_json",
    "write_json",
]

TRACE_HEADER = ("index", "witness_id", "epsilon", "ratio")


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any float64."""
    return format(float(x), ".17g")


def emit_trace_csv(rows: Iterable[Sequence], path: str | Path) -> Path:
    """Write ``(index, witness_id, epsilon|None, ratio)`` rows, index-major.

    Rows are sorted by index, then witness, then epsilon (empty epsilon
    first).  An empty trace is rejected before the file is opened.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty trace")

    def key(r):
        eps = r[2]
        return (int(r[0]), int(r[1]), -1.0 if eps is None else float(eps))

    rows.sort(key=key)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for index, wid, eps, ratio in rows:
            w.writerow([int(index), int(wid), "" if eps is None else format_float(eps),
                        format_float(ratio)])
    return path


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")
    return path


def sequence_to_json(seq: SetSequence, rule: dict | None = None) -> dict:
    """Set-sequence file content.

    With ``rule`` the file only names the construction that regenerates the
    sequence.  Sequences of unit runs are written as ``items``; anything else
    as ``runs`` with explicit starts.
    """
    if rule is not None:
        return {"rule": rule}
    limit = set_to_dict(seq.limit)
    if len(seq.starts) == seq.length:
        return {"limit": limit, "items": [set_to_dict(s) for s in seq.sets]}
    return {
        "limit": limit,
        "length": seq.length,
        "runs": [{"start": st, "set": set_to_dict(s)} for st, s in zip(seq.starts, seq.sets)],
    }


def sequence_from_json(data: dict, resolve_rule=None) -> SetSequence:
    """Inverse of :func:`sequence_to_json`.

    ``resolve_rule`` turns a ``{"rule": ...}`` payload into a sequence; the
    CLI passes the construction registry here.
    """
    if "rule" in data:
        if resolve_rule is None:
            raise SetError("rule-based sequence file but no rule resolver given")
        return resolve_rule(data["rule"])
    if "limit" not in data:
        raise SetError("sequence file needs a 'limit' set")
    limit = set_from_dict(data["limit"])
    if "items" in data:
        items = [set_from_dict(d) for d in data["items"]]
        if not items:
            raise SetError("sequence file has no items")
        return SetSequence.from_items(items, limit)
    if "runs" in data:
        runs = [(int(r["start"]), set_from_dict(r["set"])) for r in data["runs"]]
        return SetSequence.from_runs(runs, int(data["length"]), limit)
    raise SetError("sequence file needs 'items', 'runs' or 'rule'")
