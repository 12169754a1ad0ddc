"""Mutual information between volumetric features and the diagnosis label.

Each feature column is discretized into equal-frequency bins by rank, so tied
values always share a bin and any strictly increasing transform of the
feature leaves the binning, and therefore the MI, unchanged.  MI is the
plug-in estimate from the joint histogram, in bits.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from diseasefocus.categories import CATEGORY_SCORES, CategoryTable
from diseasefocus.errors import ConstantFeatureWarning, ParseError, SingleClassInput

DEFAULT_BINS = 10

# FastSurfer/FreeSurfer segmentation statistic columns, longest first
STAT_SUFFIXES = (
    "_Volume_mm3",
    "_normStdDev",
    "_normRange",
    "_normMean",
    "_normMax",
    "_normMin",
    "_NVoxels",
    "_SegId",
    "_ThickAvg",
    "_ThickStd",
    "_SurfArea",
    "_GrayVol",
    "_MeanCurv",
    "_GausCurv",
    "_FoldInd",
    "_CurvInd",
    "_NumVert",
    "_volume",
    "_thickness",
    "_area",
)


def equal_frequency_bins(feature: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per sample: ``floor(bins * (min_rank - 1) / n)``."""
    x = np.asarray(feature, dtype=np.float64)
    ranks = rankdata(x, method="min").astype(np.int64)
    return (bins * (ranks - 1)) // x.size


def _entropy_bits(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log2(p)))


def mutual_information(feature, labels, bins: int = DEFAULT_BINS) -> float:
    x = np.asarray(feature, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("feature and labels must be 1-D arrays of the same length")
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if not np.isfinite(x).all():
        raise ValueError("feature contains non-finite values")
    classes, y_idx = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise SingleClassInput("mutual information needs at least two label values")
    if np.all(x == x[0]):
        warnings.warn("constant feature has zero mutual information", ConstantFeatureWarning, stacklevel=2)
        return 0.0

    b = equal_frequency_bins(x, bins)
    n = x.size
    joint = np.zeros((bins, classes.size), dtype=np.int64)
    np.add.at(joint, (b, y_idx), 1)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    pj = joint[nz] / n
    outer = np.outer(px, py)[nz] / (n * n)
    mi = float(np.sum(pj * np.log2(pj / outer)))
    # rounding can push the estimate a hair outside [0, H(label)]
    return min(max(mi, 0.0), _entropy_bits(py, n))


def region_of_feature(name: str, overrides: Mapping[str, str] | None = None) -> str:
    """Strip a known statistic suffix: ``Left-Hippocampus_Volume_mm3 -> Left-Hippocampus``."""
    if overrides and name in overrides:
        return overrides[name]
    for suffix in STAT_SUFFIXES:
        if name.endswith(suffix) and len(name) > len(suffix):
            return name[: -len(suffix)]
    return name


@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    rows: np.ndarray  # (n_subjects, n_features)
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(self.names):
            raise ValueError(f"rows shape {rows.shape} does not match {len(self.names)} feature names")
        if rows.shape[0] != len(self.labels):
            raise ValueError("one label per row required")
        if not np.isfinite(rows).all():
            raise ValueError("feature matrix contains non-finite values")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))


@dataclass(frozen=True)
class RankedFeature:
    name: str
    mi_bits: float
    region: str
    category: str
    score: int
    rank: int


@dataclass(frozen=True)
class MiRanking:
    features: tuple[RankedFeature, ...]
    df_score: float
    bins: int
    failures: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bins": self.bins,
            "top_k": len(self.features),
            "df_score": self.df_score,
            "features": [
                {
                    "rank": f.rank,
                    "feature": f.name,
                    "mi_bits": f.mi_bits,
                    "region": f.region,
                    "category": f.category,
                    "score": f.score,
                }
                for f in self.features
            ],
            "failures": dict(self.failures),
        }


def rank_features(
    m: FeatureMatrix,
    cats: CategoryTable,
    bins: int = DEFAULT_BINS,
    k: int = 10,
    region_overrides: Mapping[str, str] | None = None,
) -> MiRanking:
    """MI per column, sorted descending (ties by name), DF score over the top ``k``."""
    if k < 1:
        raise ValueError(f"top-k must be positive, got {k}")
    if not m.names:
        raise ValueError("feature matrix has no columns")
    scored: list[tuple[str, float]] = []
    failures: dict[str, str] = {}
    for j, name in enumerate(m.names):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            mi = mutual_information(m.rows[:, j], m.labels, bins)
        if caught:
            failures[name] = str(caught[0].message)
        scored.append((name, mi))
    scored.sort(key=lambda t: (-t[1], t[0]))
    top = []
    for rank, (name, mi) in enumerate(scored[:k], start=1):
        region = region_of_feature(name, region_overrides)
        cat = cats.category(region)
        top.append(RankedFeature(name, mi, region, cat, CATEGORY_SCORES[cat], rank))
    df = sum(f.score for f in top) / len(top)
    return MiRanking(tuple(top), df, bins, failures)


def names_df_score(feature_names: Sequence[str], cats: CategoryTable, overrides=None) -> float:
    """DF score of an already ranked feature list."""
    scores = [cats.score(region_of_feature(n, overrides)) for n in feature_names]
    return sum(scores) / len(scores)


def read_feature_csv(path, label_column: str = "label", id_column: str | None = "subject_id") -> FeatureMatrix:
    """Header row of feature names plus a ``label`` column; every other cell numeric."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(1, "empty file", path)
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParseError(1, f"no {label_column!r} column in header", path)
        li = header.index(label_column)
        skip = {li}
        if id_column and id_column in header:
            skip.add(header.index(id_column))
        cols = [i for i in range(len(header)) if i not in skip]
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}", path)
            try:
                labels.append(int(row[li]))
            except ValueError:
                raise ParseError(line, f"label {row[li]!r} is not an integer", path) from None
            try:
                vals = [float(row[i]) for i in cols]
            except ValueError as exc:
                raise ParseError(line, f"non-numeric feature value ({exc})", path) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(line, "non-finite feature value", path)
            rows.append(vals)
    if not rows:
        raise ParseError(reader.line_num, "no data rows", path)
    return FeatureMatrix(tuple(header[i] for i in cols), np.array(rows), np.array(labels))


def load_region_overrides(path) -> dict[str, str]:
    """TSV ``feature-name<TAB>region-name`` overriding suffix stripping."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2:
            raise ParseError(lineno, "expected 'feature<TAB>region'", path)
        out[parts[0]] = parts[1]
    return out
