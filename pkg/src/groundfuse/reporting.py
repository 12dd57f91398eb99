"""Deterministic JSON report serialization and stdout tables.

Reports must be byte-identical across runs, platforms, and worker counts, so
floats are printed with 17 significant digits (full double round-trip) and
key order follows construction order. The stdout tables are rendered from
the written report document, never from a second computation.
"""

from __future__ import annotations

import json
import math


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"reports may not contain non-finite floats: {x}")
    return format(x, ".17g")


def dumps(obj) -> str:
    """Serialize to JSON preserving dict order, floats at 17 significant digits."""
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def _write(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(": ")
            _write(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(", ")
            _write(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def render_match_table(report: dict) -> str:
    """Sub/Rel/Obj/Total accuracy table from a matching report document."""
    rows = []
    header = f"{'Method':<10} {'Sub':>8} {'Rel':>8} {'Obj':>8} {'Total':>8}"
    rows.append(header)
    rows.append("-" * len(header))
    for label, key in (("baseline", "baseline_accuracy"), ("fused", "fused_accuracy")):
        agg = report["aggregates"][key]
        per = agg["per_component"]
        cells = [
            _pct(per.get("subject")),
            _pct(per.get("relation")),
            _pct(per.get("object")),
            _pct(agg["total"]),
        ]
        rows.append(f"{label:<10} " + " ".join(f"{c:>8}" for c in cells))
    return "\n".join(rows)


def render_retrieval_table(report: dict) -> str:
    """Before/after Recall@K table from a retrieval report document."""
    recall = report["aggregates"]["recall"]
    ks = sorted(int(k) for k in recall["before"])
    header = f"{'Stage':<10} " + " ".join(f"{'R@' + str(k):>8}" for k in ks)
    rows = [header, "-" * len(header)]
    for label in ("before", "after"):
        cells = [_pct(recall[label][str(k)]) for k in ks]
        rows.append(f"{label:<10} " + " ".join(f"{c:>8}" for c in cells))
    return "\n".join(rows)


def _pct(value) -> str:
    return "-" if value is None else f"{value:.2f}"
