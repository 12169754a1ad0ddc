"""Report serialization (JSON canonical, CSV projections) and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from diseasefocus import __version__
from diseasefocus.regions import GROUP_TITLES, DfReport

DF_CSV_COLUMNS = ("group", "rank", "region", "voxel_count", "M_r", "category", "score")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def make_manifest(subcommand: str, params: dict, inputs: Iterable = (), timestamp: bool = True) -> dict:
    manifest = {
        "tool": "diseasefocus",
        "version": __version__,
        "subcommand": subcommand,
        "parameters": params,
        "inputs": {str(p): file_digest(p) for p in inputs},
    }
    if timestamp:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return manifest


def _clean(obj):
    """NaN/Inf are not valid JSON; emit null instead."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def df_rows_csv(reports: Sequence[DfReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=DF_CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        for row in r.rows():
            w.writerow(row)
    return buf.getvalue()


def region_table(reports: Sequence[DfReport]) -> list[list]:
    """Side-by-side (region, M_r) columns per outcome group, one row per rank."""
    header = []
    for r in reports:
        header += [GROUP_TITLES.get(r.group, r.group), "M_r"]
    rows = [header]
    depth = max((r.k for r in reports), default=0)
    for i in range(depth):
        row = []
        for r in reports:
            if i < r.k:
                row += [r.top[i].name, r.top[i].median]
            else:
                row += ["", ""]
        rows.append(row)
    return rows


def region_table_csv(reports: Sequence[DfReport], digits: int = 3) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, row in enumerate(region_table(reports)):
        if i:
            row = [f"{v:.{digits}f}" if isinstance(v, float) else v for v in row]
        w.writerow(row)
    return buf.getvalue()


def write_text(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
