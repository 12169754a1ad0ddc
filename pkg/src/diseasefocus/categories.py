"""Pathology category tables: region name -> C1/C2/C3 and its score."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from diseasefocus.errors import DuplicateRegion, ParseError, UnknownCategoryToken

CATEGORY_SCORES = {"C1": 2, "C2": 1, "C3": 0}
DEFAULT_CATEGORY = "C3"


@dataclass(frozen=True)
class CategoryTable:
    """Region-name -> category lookup.  Unlisted regions resolve to C3."""

    entries: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        entries = dict(self.entries)
        for name, cat in entries.items():
            if cat not in CATEGORY_SCORES:
                raise UnknownCategoryToken(f"{name!r}: unknown category {cat!r}")
        object.__setattr__(self, "entries", entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self):
        return len(self.entries)

    def category(self, name: str) -> str:
        return self.entries.get(name, DEFAULT_CATEGORY)

    def score(self, name: str) -> int:
        return CATEGORY_SCORES[self.category(name)]

    def names(self, category: str) -> list[str]:
        """Sorted region names listed under ``category``."""
        return sorted(n for n, c in self.entries.items() if c == category)


def parse_category_table(text: str, path=None) -> CategoryTable:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r\n")
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not parts[0]:
            raise ParseError(lineno, f"expected 'region-name<TAB>category', got {raw!r}", path)
        name, token = parts
        if token not in CATEGORY_SCORES:
            raise UnknownCategoryToken(f"line {lineno}: unknown category {token!r} for {name!r}")
        if name in entries:
            raise DuplicateRegion(f"line {lineno}: region {name!r} listed twice")
        entries[name] = token
    return CategoryTable(entries)


def load_category_table(path) -> CategoryTable:
    path = Path(path)
    return parse_category_table(path.read_text(), path)


def default_category_table() -> CategoryTable:
    text = resources.files("diseasefocus.data").joinpath("default_categories.tsv").read_text()
    return parse_category_table(text, "default_categories.tsv")
