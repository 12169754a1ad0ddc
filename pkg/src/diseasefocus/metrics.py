"""Binary classification metrics with AD (label 1) as the positive class.

A record is predicted positive when ``score >= threshold``.  Ratios with a
zero denominator are reported as 0 with a :class:`DegenerateDenominatorWarning`
so reports never contain NaN.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from diseasefocus.errors import (
    DegenerateDenominatorWarning,
    EmptyInput,
    NoPositives,
    ParseError,
    SingleClassInput,
)

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class PredictionRecord:
    subject_id: str
    true_label: int
    score: float

    def __post_init__(self):
        if self.true_label not in (0, 1):
            raise ValueError(f"{self.subject_id}: label must be 0 or 1, got {self.true_label!r}")
        if not math.isfinite(self.score):
            raise ValueError(f"{self.subject_id}: score must be finite")

    def predicted_label(self, threshold: float = DEFAULT_THRESHOLD) -> int:
        return int(self.score >= threshold)


@dataclass(frozen=True)
class Counts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricReport:
    counts: Counts
    sensitivity: float
    specificity: float
    f1: float
    balanced_accuracy: float
    auroc: float
    auprc: float
    threshold: float = DEFAULT_THRESHOLD

    # column order of the performance report
    COLUMNS = ("F-1", "BA", "AUROC", "AUPRC", "Specificity", "Sensitivity")

    def table_row(self) -> dict:
        return {
            "F-1": self.f1,
            "BA": self.balanced_accuracy,
            "AUROC": self.auroc,
            "AUPRC": self.auprc,
            "Specificity": self.specificity,
            "Sensitivity": self.sensitivity,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d


def _arrays(records: Sequence[PredictionRecord]) -> tuple[np.ndarray, np.ndarray]:
    labels = np.fromiter((r.true_label for r in records), dtype=np.int64, count=len(records))
    scores = np.fromiter((r.score for r in records), dtype=np.float64, count=len(records))
    return labels, scores


def confusion(records: Sequence[PredictionRecord], threshold: float = DEFAULT_THRESHOLD) -> Counts:
    if not records:
        raise EmptyInput("no prediction records")
    labels, scores = _arrays(records)
    pred = scores >= threshold
    pos = labels == 1
    return Counts(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def _ratio(num: int, den: int, name: str) -> float:
    if den == 0:
        warnings.warn(f"{name}: zero denominator, reported as 0", DegenerateDenominatorWarning, stacklevel=3)
        return 0.0
    return num / den


def point_metrics(counts: Counts) -> tuple[float, float, float, float]:
    """(sensitivity, specificity, f1, balanced accuracy)."""
    sens = _ratio(counts.tp, counts.tp + counts.fn, "sensitivity")
    spec = _ratio(counts.tn, counts.tn + counts.fp, "specificity")
    f1 = _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn, "f1")
    return sens, spec, f1, (sens + spec) / 2


def auroc(records: Sequence[PredictionRecord]) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie), via mid-ranks."""
    labels, scores = _arrays(records)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AUROC needs at least one positive and one negative record")
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    # mid-rank of each tied block, 1-based; doubled to stay integral
    ranks2 = np.empty(s.size, dtype=np.int64)
    start = 0
    for end in np.append(np.flatnonzero(np.diff(s)) + 1, s.size):
        ranks2[start:end] = start + 1 + end  # 2 * (start+1 + end)/2
        start = end
    pos_rank2 = int(ranks2[labels[order] == 1].sum())
    u2 = pos_rank2 - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def auprc(records: Sequence[PredictionRecord]) -> float:
    """Average precision over a descending-score sweep; tied scores enter as one block."""
    labels, scores = _arrays(records)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("AUPRC needs at least one positive record")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    lab = labels[order]
    total = 0.0
    tp = fp = 0
    start = 0
    for end in np.append(np.flatnonzero(np.diff(s)) + 1, s.size):
        block_pos = int(lab[start:end].sum())
        tp += block_pos
        fp += (end - start) - block_pos
        if block_pos:
            total += (tp / (tp + fp)) * (block_pos / n_pos)
        start = end
    return total


def evaluate(records: Sequence[PredictionRecord], threshold: float = DEFAULT_THRESHOLD) -> MetricReport:
    counts = confusion(records, threshold)
    sens, spec, f1, ba = point_metrics(counts)
    return MetricReport(counts, sens, spec, f1, ba, auroc(records), auprc(records), threshold)


def read_predictions(path) -> list[PredictionRecord]:
    """Parse ``subject_id,true_label,score`` CSV (header row required)."""
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(1, "empty file", path)
        header = [h.strip() for h in header]
        want = ["subject_id", "true_label", "score"]
        if header[:3] != want:
            raise ParseError(1, f"header must start with {','.join(want)}, got {','.join(header)}", path)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ParseError(line, f"expected 3 fields, got {len(row)}", path)
            try:
                label = int(row[1])
                score = float(row[2])
            except ValueError:
                raise ParseError(line, f"bad label/score {row[1]!r}, {row[2]!r}", path) from None
            try:
                records.append(PredictionRecord(row[0].strip(), label, score))
            except ValueError as exc:
                raise ParseError(line, str(exc), path) from None
    return records
