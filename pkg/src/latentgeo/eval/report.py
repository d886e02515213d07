"""Report files.

CSV columns, in order: grouping keys (``KEY_COLUMNS``), ``n_triplets``,
``sampling``, ``status``, then for each metric in alphabetical order
``<metric>_mean`` and ``<metric>_se``, then ``<metric>_excluded`` counts, then
``extra_<name>`` columns. Floats are written with 6 significant digits. JSON
holds the same fields per row with full precision.

Raw dumps hold one line per (triplet, algorithm) with every metric value.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

from .pipeline import MetricReport, TripletResult

KEY_COLUMNS = ("algorithm", "dim", "rank", "iat", "budget", "seed")
META_COLUMNS = ("n_triplets", "sampling", "status")
_INT_KEYS = {"dim", "rank", "budget"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def report_row(r: MetricReport) -> dict:
    row = {k: r.keys.get(k) for k in KEY_COLUMNS}
    row.update(n_triplets=r.n_triplets, sampling=r.sampling, status=r.status)
    for m in r.metrics:
        row[f"{m}_mean"] = r.means[m]
        row[f"{m}_se"] = r.stderrs.get(m, math.nan)
    for m in sorted(r.excluded):
        row[f"{m}_excluded"] = r.excluded[m]
    for k in sorted(r.extras):
        row[f"extra_{k}"] = r.extras[k]
    return row


def _columns(rows: list[dict]) -> list[str]:
    fixed = list(KEY_COLUMNS) + list(META_COLUMNS)
    rest = {c for row in rows for c in row} - set(fixed)
    metrics = sorted({c.rsplit("_", 1)[0] for c in rest if c.endswith(("_mean", "_se"))})
    cols = fixed + [c for m in metrics for c in (f"{m}_mean", f"{m}_se")]
    cols += sorted(c for c in rest if c.endswith("_excluded"))
    cols += sorted(c for c in rest if c.startswith("extra_"))
    return cols


def export_report(reports: list[MetricReport], path, fmt: str | None = None) -> Path:
    """Write ``reports`` as CSV or JSON (picked from the suffix when ``fmt`` is None)."""
    if not reports:
        raise ValueError("refusing to write an empty report")
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    rows = [report_row(r) for r in reports]
    cols = _columns(rows)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in cols])
    elif fmt == "json":
        ordered = [{c: row.get(c) for c in cols if c in row} for row in rows]
        path.write_text(json.dumps({"columns": cols, "rows": ordered}, indent=1) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def _parse(col: str, text: str):
    if text == "":
        return None
    if col in _INT_KEYS or col == "n_triplets" or col.endswith("_excluded"):
        return int(text)
    if col in KEY_COLUMNS or col in META_COLUMNS:
        return int(text) if col == "seed" and text.lstrip("-").isdigit() else text
    return float(text)


def _from_row(row: dict) -> MetricReport:
    keys = {k: row[k] for k in KEY_COLUMNS if row.get(k) is not None}
    means, ses, excl, extras = {}, {}, {}, {}
    for c, v in row.items():
        if v is None:
            continue
        if c.endswith("_mean"):
            means[c[:-5]] = float(v)
        elif c.endswith("_se"):
            ses[c[:-3]] = float(v)
        elif c.endswith("_excluded"):
            excl[c[:-9]] = int(v)
        elif c.startswith("extra_"):
            extras[c[6:]] = float(v)
    return MetricReport(keys, means, ses, int(row["n_triplets"]), excl, row["sampling"], row["status"], extras)


def load_report(path) -> list[MetricReport]:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return [_from_row(row) for row in data["rows"]]
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [_from_row({c: _parse(c, v) for c, v in row.items()}) for row in rows]


def write_raw(raw: dict[str, list[TripletResult]], path, keys: dict | None = None) -> Path:
    """Per-triplet dump (CSV, full precision) from which every aggregate can be recomputed."""
    path = Path(path)
    results = [r for rs in raw.values() for r in rs]
    if not results:
        raise ValueError("refusing to write an empty raw dump")
    metrics = sorted(results[0].values)
    key_cols = [k for k in KEY_COLUMNS if k != "algorithm" and keys and k in keys]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(key_cols + ["triplet_id", "algorithm", "lam"] + metrics)
        for r in results:
            w.writerow([keys[k] for k in key_cols] + [r.triplet_id, r.kind, repr(r.lam)] + [repr(r.values[m]) for m in metrics])
    return path


def read_raw(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_reports(reports, raw_by_cell, out_dir, stem: str = "report") -> list[Path]:
    """CSV + JSON aggregate reports plus one raw dump per cell, all inside ``out_dir``."""
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = [export_report(reports, out_dir / f"{stem}.csv"), export_report(reports, out_dir / f"{stem}.json")]
    for name, (raw, keys) in raw_by_cell.items():
        if raw:
            paths.append(write_raw(raw, out_dir / f"raw_{name}.csv", keys))
    return paths
