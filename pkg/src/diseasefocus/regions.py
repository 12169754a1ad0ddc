"""Per-region median saliency, top-K ranking and the Disease-Focus score.

Region statistics use the median of normalized saliency values inside each
labelled region (background label 0 is excluded).  Regions are ranked by
descending median; ties go to the larger region, then to the
lexicographically smaller name.  The Disease-Focus (DF) score of a ranking
is the mean category score (C1=2, C2=1, C3=0) of its top-K regions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from diseasefocus.categories import CategoryTable
from diseasefocus.errors import EmptyGroup, EmptyGroupWarning, EmptyLabelMap, UnknownRegionWarning
from diseasefocus.labels import BACKGROUND, LabelMap
from diseasefocus.saliency import SaliencyMap
from diseasefocus.volume import check_same_grid

OUTCOMES = ("TP", "TN", "FP", "FN")
GROUP_TITLES = {
    "TP": "True Positive",
    "TN": "True Negative",
    "FP": "False Positive",
    "FN": "False Negative",
    "ALL": "All",
}
MODES = ("pooled", "per-image")
DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class RegionStatRecord:
    name: str
    region_id: int
    voxel_count: int
    median: float
    rank: int = 0


@dataclass(frozen=True)
class DfReport:
    model_id: str
    group: str
    top: tuple[RegionStatRecord, ...]
    categories: tuple[str, ...]
    scores: tuple[int, ...]
    df_score: float
    unknown_regions: tuple[str, ...] = ()
    mode: str = "pooled"
    background_median: float | None = None

    @property
    def k(self) -> int:
        return len(self.top)

    @property
    def score_fraction(self) -> Fraction:
        """DF score as an exact rational ``sum(scores) / K``."""
        return Fraction(sum(self.scores), len(self.scores))

    def rows(self) -> list[dict]:
        """One flat dict per top region, in rank order."""
        return [
            {
                "group": self.group,
                "rank": rec.rank,
                "region": rec.name,
                "voxel_count": rec.voxel_count,
                "M_r": rec.median,
                "category": cat,
                "score": score,
            }
            for rec, cat, score in zip(self.top, self.categories, self.scores)
        ]

    def to_dict(self) -> dict:
        d = {
            "model_id": self.model_id,
            "group": self.group,
            "mode": self.mode,
            "top_k": self.k,
            "df_score": self.df_score,
            "regions": [
                {k: v for k, v in row.items() if k != "group"} | {"region_id": rec.region_id}
                for row, rec in zip(self.rows(), self.top)
            ],
            "unknown_regions": list(self.unknown_regions),
        }
        if self.background_median is not None:
            d["background_median"] = self.background_median
        return d


def _sorted_median(values: np.ndarray) -> float:
    """Median of an already sorted 1-D array; even counts average the central pair."""
    n = values.size
    mid = n // 2
    if n % 2:
        return float(values[mid])
    return float((values[mid - 1] + values[mid]) / 2)


def _grouped_values(s: SaliencyMap, labels: LabelMap) -> dict[int, np.ndarray]:
    """Sorted saliency values per label id (background included)."""
    check_same_grid(s.grid, labels.grid)
    ids = labels.ids.ravel()
    vals = s.data.ravel()
    order = np.lexsort((vals, ids))
    ids_sorted = ids[order]
    vals_sorted = vals[order]
    uniq, starts = np.unique(ids_sorted, return_index=True)
    bounds = list(starts[1:]) + [ids_sorted.size]
    return {int(u): vals_sorted[a:b] for u, a, b in zip(uniq, starts, bounds)}


def _require_normalized(s: SaliencyMap):
    if not s.normalized:
        raise ValueError("region statistics need a min-max normalized saliency map")


def region_medians(s: SaliencyMap, labels: LabelMap) -> list[RegionStatRecord]:
    """Median normalized saliency per labelled region, ranked (rank 1 = highest)."""
    _require_normalized(s)
    groups = _grouped_values(s, labels)
    stats = [
        RegionStatRecord(name, rid, int(groups[rid].size), _sorted_median(groups[rid]))
        for rid, name in labels.regions.items()
        if rid in groups
    ]
    if not stats:
        raise EmptyLabelMap("label map has no labelled (nonzero) voxels")
    return rank_regions(stats, len(stats))


def background_median(s: SaliencyMap, labels: LabelMap) -> float | None:
    """Median saliency over label-0 voxels, or None if there are none."""
    vals = _grouped_values(s, labels).get(BACKGROUND)
    return None if vals is None else _sorted_median(vals)


def _rank_key(rec: RegionStatRecord):
    return (-rec.median, -rec.voxel_count, rec.name)


def rank_regions(stats: Iterable[RegionStatRecord], k: int = DEFAULT_TOP_K) -> list[RegionStatRecord]:
    if k < 1:
        raise ValueError(f"top-k must be positive, got {k}")
    ordered = sorted(stats, key=_rank_key)
    if not ordered:
        raise ValueError("cannot rank an empty list of regions")
    return [replace(rec, rank=i) for i, rec in enumerate(ordered[:k], start=1)]


def df_score(
    top: Sequence[RegionStatRecord],
    cats: CategoryTable,
    model_id: str = "",
    group: str = "ALL",
    mode: str = "pooled",
    background: float | None = None,
) -> DfReport:
    """Mean category score over ``top``; regions missing from ``cats`` score 0."""
    if not top:
        raise ValueError("DF score needs at least one region")
    names = [rec.name for rec in top]
    categories = tuple(cats.category(n) for n in names)
    scores = tuple(cats.score(n) for n in names)
    unknown = tuple(n for n in names if n not in cats)
    if unknown:
        warnings.warn(
            f"regions not in the category table (scored as C3): {', '.join(unknown)}",
            UnknownRegionWarning,
            stacklevel=2,
        )
    return DfReport(
        model_id=model_id,
        group=group,
        top=tuple(top),
        categories=categories,
        scores=scores,
        df_score=sum(scores) / len(scores),
        unknown_regions=unknown,
        mode=mode,
        background_median=background,
    )


def combined_df_score(reports: Sequence[DfReport]) -> float:
    """Unweighted mean of several reports' DF scores, computed exactly then rounded once."""
    if not reports:
        raise ValueError("no reports to combine")
    total = sum((r.score_fraction for r in reports), Fraction(0))
    return float(total / len(reports))


def df_from_region_list(names: Sequence[str], cats: CategoryTable, **kw) -> DfReport:
    """DF report for an already ranked list of region names (no saliency data)."""
    top = [RegionStatRecord(n, 0, 0, math.nan, i) for i, n in enumerate(names, start=1)]
    return df_score(top, cats, **kw)


# ---------------------------------------------------------------------------
# cohorts


@dataclass(frozen=True)
class CohortMember:
    saliency: SaliencyMap
    outcome: str
    labels: LabelMap
    subject_id: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")


@dataclass(frozen=True)
class GroupStats:
    group: str
    mode: str
    n_subjects: int
    stats: tuple[RegionStatRecord, ...]  # every region, ranked
    background_median: float | None


@dataclass(frozen=True)
class CohortResult:
    mode: str
    reports: tuple[DfReport, ...]
    groups: tuple[GroupStats, ...] = field(default=())
    omitted: tuple[str, ...] = ()

    def report(self, group: str) -> DfReport:
        for r in self.reports:
            if r.group == group:
                return r
        raise KeyError(group)


def _pooled_group(members: Sequence[CohortMember]) -> tuple[list[RegionStatRecord], float | None]:
    pooled: dict[str, list[np.ndarray]] = {}
    ids: dict[str, int] = {}
    background: list[np.ndarray] = []
    for m in members:
        _require_normalized(m.saliency)
        groups = _grouped_values(m.saliency, m.labels)
        if BACKGROUND in groups:
            background.append(groups[BACKGROUND])
        for rid, name in m.labels.regions.items():
            if rid in groups:
                pooled.setdefault(name, []).append(groups[rid])
                ids.setdefault(name, rid)
    stats = []
    for name, chunks in pooled.items():
        vals = np.sort(np.concatenate(chunks))
        stats.append(RegionStatRecord(name, ids[name], int(vals.size), _sorted_median(vals)))
    bg = _sorted_median(np.sort(np.concatenate(background))) if background else None
    return stats, bg


def _exact_mean(values: Sequence[float]) -> float:
    """Correctly rounded mean, so that n copies of x average to exactly x."""
    return float(sum(map(Fraction, values), Fraction(0)) / len(values))


def _per_image_group(members: Sequence[CohortMember]) -> tuple[list[RegionStatRecord], float | None]:
    medians: dict[str, list[float]] = {}
    counts: dict[str, int] = {}
    ids: dict[str, int] = {}
    backgrounds: list[float] = []
    for m in members:
        for rec in region_medians(m.saliency, m.labels):
            medians.setdefault(rec.name, []).append(rec.median)
            counts[rec.name] = counts.get(rec.name, 0) + rec.voxel_count
            ids.setdefault(rec.name, rec.region_id)
        bg = background_median(m.saliency, m.labels)
        if bg is not None:
            backgrounds.append(bg)
    stats = [
        RegionStatRecord(name, ids[name], counts[name], _exact_mean(v))
        for name, v in medians.items()
    ]
    bg = _exact_mean(backgrounds) if backgrounds else None
    return stats, bg


def cohort_analysis(
    members: Sequence[CohortMember],
    cats: CategoryTable,
    mode: str = "pooled",
    k: int = DEFAULT_TOP_K,
    model_id: str = "",
    include_all: bool = False,
) -> CohortResult:
    """Group subjects by outcome and emit one DF report per non-empty group.

    ``pooled`` takes the median over all member voxels of a region;
    ``per-image`` averages each subject's region median.  Empty outcome
    groups are skipped with a warning; an empty cohort raises :class:`EmptyGroup`.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not members:
        raise EmptyGroup("cohort has no members")
    reducer = _pooled_group if mode == "pooled" else _per_image_group

    by_group: dict[str, list[CohortMember]] = {g: [] for g in OUTCOMES}
    for m in members:
        by_group[m.outcome].append(m)
    order = list(OUTCOMES) + (["ALL"] if include_all else [])
    if include_all:
        by_group["ALL"] = list(members)

    reports, groups, omitted = [], [], []
    for g in order:
        group_members = by_group[g]
        if not group_members:
            warnings.warn(f"outcome group {g} has no members; report omitted", EmptyGroupWarning, stacklevel=2)
            omitted.append(g)
            continue
        stats, bg = reducer(group_members)
        if not stats:
            raise EmptyLabelMap(f"group {g}: no labelled voxels in any member")
        ranked = rank_regions(stats, len(stats))
        groups.append(GroupStats(g, mode, len(group_members), tuple(ranked), bg))
        reports.append(df_score(ranked[:k], cats, model_id=model_id, group=g, mode=mode, background=bg))
    return CohortResult(mode, tuple(reports), tuple(groups), tuple(omitted))


def stats_from_rows(rows: Iterable[dict], k: int, cats: CategoryTable, mode: str = "pooled") -> dict[str, list[DfReport]]:
    """Rank precomputed ``(model, group, region, M_r[, voxel_count])`` rows.

    Returns reports keyed by model id, one per group, in first-seen order.
    """
    tables: dict[str, dict[str, list[RegionStatRecord]]] = {}
    for row in rows:
        rec = RegionStatRecord(
            row["region"], int(row.get("region_id") or 0), int(row.get("voxel_count") or 0), float(row["M_r"])
        )
        tables.setdefault(row.get("model", ""), {}).setdefault(row["group"], []).append(rec)
    out: dict[str, list[DfReport]] = {}
    for model, by_group in tables.items():
        out[model] = [
            df_score(rank_regions(recs, k), cats, model_id=model, group=g, mode=mode)
            for g, recs in by_group.items()
        ]
    return out
