"""Serialization of theorem-check results: text table, CSV and JSON lines."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict

from .chain import DEFAULT_TOL
from .verify import TheoremCheckResult

__version__ = "0.1.0"

FIELDS = ("theorem", "instance", "status", "hypothesis", "lhs", "relation", "rhs", "margin", "detail")
FORMATS = ("table", "csv", "json-lines")


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _row(r: TheoremCheckResult, timings: bool) -> dict:
    d = {k: getattr(r, k) for k in FIELDS}
    for k in ("lhs", "rhs", "margin"):
        d[k] = _num(d[k])
    if timings:
        d["runtime"] = round(r.runtime, 6)
    return d


def _text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def provenance(seed=0, instances=(), cfg=None) -> dict:
    """Header record: library version, seed, tolerances and the instances checked."""
    tol = asdict(DEFAULT_TOL)
    out = {"library": "curvlab", "version": __version__, "seed": seed, "tolerances": tol}
    if cfg is not None:
        out["check_tol"] = cfg.check_tol
        out["optimizer"] = asdict(cfg.opt)
        out["samples"] = cfg.samples
        out["times"] = list(cfg.times)
    out["instances"] = [{"id": i.id, **i.provenance} for i in instances]
    return out


def summary(results) -> dict:
    counts = {"pass": 0, "fail": 0, "skipped": 0}
    for r in results:
        counts[r.status] += 1
    return counts


def render(results, fmt: str = "table", header: dict | None = None, timings: bool = False) -> str:
    """Render ``results``; the same input always gives the same bytes unless ``timings``."""
    rows = [_row(r, timings) for r in results]
    cols = list(FIELDS) + (["runtime"] if timings else [])
    if fmt == "json-lines":
        lines = [json.dumps({"type": "header", **(header or {})}, sort_keys=True)]
        lines += [json.dumps({"type": "result", **row}) for row in rows]
        lines.append(json.dumps({"type": "summary", **summary(results)}))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _text(v) for k, v in row.items()})
        return buf.getvalue()
    if fmt == "table":
        cells = [cols] + [[_text(row[c]) for c in cols] for row in rows]
        widths = [min(max(len(r[i]) for r in cells), 60) for i in range(len(cols))]
        out = []
        for k, r in enumerate(cells):
            out.append("  ".join(v[:60].ljust(w) for v, w in zip(r, widths)).rstrip())
            if k == 0:
                out.append("  ".join("-" * w for w in widths))
        s = summary(results)
        out.append(f"\n{s['pass']} passed, {s['fail']} failed, {s['skipped']} skipped")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def write(results, path, fmt="table", header=None, timings=False) -> None:
    text = render(results, fmt, header, timings)
    if path in (None, "-"):
        print(text, end="")
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def exit_code(results) -> int:
    return 1 if any(r.status == "fail" for r in results) else 0


def render_records(records, fmt: str = "table", header: dict | None = None) -> str:
    """Render plain dict rows (used by the non-verify subcommands)."""
    cols = []
    for rec in records:
        cols += [k for k in rec if k not in cols]
    if fmt == "json-lines":
        lines = [json.dumps({"type": "header", **(header or {})}, sort_keys=True)]
        lines += [json.dumps({k: _jsonable(v) for k, v in rec.items()}) for rec in records]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow({k: _text(_jsonable(v)) for k, v in rec.items()})
        return buf.getvalue()
    if fmt == "table":
        cells = [cols] + [[_text(_jsonable(rec.get(c))) for c in cols] for rec in records]
        widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
        out = []
        for k, r in enumerate(cells):
            out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
            if k == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def _jsonable(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return v
    if hasattr(v, "tolist"):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float):
        return _num(v)
    return v
