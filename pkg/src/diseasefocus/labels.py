"""Segmentation label maps and their id -> name region tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from diseasefocus.errors import DuplicateRegion, ParseError
from diseasefocus.volume import INTEGER_KINDS, Volume3D, read_volume, write_volume

BACKGROUND = 0


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Integer label grid plus the table naming each nonzero label."""

    grid: Volume3D
    regions: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        data = self.grid.data
        if not np.array_equal(data, np.round(data)) or data.min() < 0:
            raise ValueError("label maps must hold non-negative integer values")
        regions = {int(k): str(v) for k, v in dict(self.regions).items()}
        if BACKGROUND in regions:
            raise ValueError("region id 0 is reserved for background")
        if any(k < 0 for k in regions):
            raise ValueError("region ids must be non-negative")
        names = list(regions.values())
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateRegion(f"duplicate region names: {', '.join(dup)}")
        present = set(np.unique(data).astype(np.int64).tolist()) - {BACKGROUND}
        missing = sorted(present - set(regions))
        if missing:
            raise ValueError(f"label values {missing} have no entry in the region table")
        grid = self.grid
        if grid.scalar_kind not in INTEGER_KINDS:
            grid = Volume3D(grid.data, grid.spacing, "int32")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "regions", dict(sorted(regions.items())))

    @property
    def ids(self) -> np.ndarray:
        """Label values as an int64 array."""
        return self.grid.data.astype(np.int64)

    @property
    def dims(self):
        return self.grid.dims

    def name_to_id(self) -> dict[str, int]:
        return {name: rid for rid, name in self.regions.items()}


def parse_region_table(text: str, path=None) -> dict[int, str]:
    """Parse ``region-id<TAB>region-name`` lines; ``#`` starts a comment."""
    table: dict[int, str] = {}
    seen_names: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r\n")
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not parts[1]:
            raise ParseError(lineno, f"expected 'id<TAB>name', got {raw!r}", path)
        try:
            rid = int(parts[0])
        except ValueError:
            raise ParseError(lineno, f"region id {parts[0]!r} is not an integer", path) from None
        if rid < 0:
            raise ParseError(lineno, f"negative region id {rid}", path)
        if rid == BACKGROUND:
            # tolerated: FreeSurfer colour tables list 0 as 'Unknown'
            continue
        name = parts[1]
        if rid in table:
            raise DuplicateRegion(f"line {lineno}: region id {rid} listed twice")
        if name in seen_names:
            raise DuplicateRegion(f"line {lineno}: region name {name!r} listed twice")
        table[rid] = name
        seen_names.add(name)
    return table


def load_region_table(path) -> dict[int, str]:
    path = Path(path)
    return parse_region_table(path.read_text(), path)


def format_region_table(regions: Mapping[int, str]) -> str:
    lines = ["# region-id\tregion-name"]
    lines += [f"{rid}\t{name}" for rid, name in sorted(regions.items())]
    return "\n".join(lines) + "\n"


def write_region_table(regions: Mapping[int, str], path) -> None:
    Path(path).write_text(format_region_table(regions))


def read_label_map(volume_path, table_path) -> LabelMap:
    return LabelMap(read_volume(volume_path), load_region_table(table_path))


def write_label_map(labels: LabelMap, volume_path, table_path, scalar_kind: str = "int32") -> None:
    write_volume(labels.grid, volume_path, scalar_kind)
    write_region_table(labels.regions, table_path)
