"""Macro-F1, confusion matrices and a label-flip stability measure."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import AlignmentError, EmptyInputError, InvalidLabelError

INVALID = -1


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion counts must be square, got {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.k != self.k:
            raise ValueError(f"cannot merge k={self.k} with k={other.k}")
        return ConfusionMatrix(self.counts + other.counts)

    __add__ = merge


def confusion(preds: Sequence[int], truths: Sequence[int], k: int) -> ConfusionMatrix:
    """Tally (truth, prediction) pairs; truths equal to -1 are skipped."""
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    t = np.asarray(truths, dtype=np.int64).reshape(-1)
    if p.shape != t.shape:
        raise AlignmentError(f"{p.size} predictions vs {t.size} ground-truth labels")
    if ((p < 0) | (p >= k)).any():
        bad = int(p[(p < 0) | (p >= k)][0])
        raise InvalidLabelError(f"invalid prediction {bad}; predictions must lie in [0, {k - 1}]")
    if ((t < INVALID) | (t >= k)).any():
        bad = int(t[(t < INVALID) | (t >= k)][0])
        raise InvalidLabelError(f"invalid ground-truth label {bad}")
    keep = t != INVALID
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t[keep], p[keep]), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class F1Report:
    per_class: np.ndarray
    macro: float
    support: np.ndarray
    precision: np.ndarray
    recall: np.ndarray


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def f1_report(cm: ConfusionMatrix) -> F1Report:
    """Per-class F1 = 2TP / (2TP + FP + FN), macro = plain mean over all k.

    A class that is neither present nor predicted scores 0 and still counts
    toward the mean. The macro value is the correctly rounded mean of the
    exact per-class ratios, so it does not depend on summation order.
    """
    c = cm.counts
    tp = np.diag(c).astype(np.float64)
    fp = c.sum(axis=0) - np.diag(c)
    fn = c.sum(axis=1) - np.diag(c)
    den = 2 * tp + fp + fn
    per_class = _safe_ratio(2 * tp, den)
    exact = sum((Fraction(int(2 * t), int(d)) for t, d in zip(tp, den) if d > 0), Fraction(0))
    return F1Report(
        per_class=per_class,
        macro=float(exact / cm.k) if cm.k else 0.0,
        support=c.sum(axis=1),
        precision=_safe_ratio(tp, tp + fp),
        recall=_safe_ratio(tp, tp + fn),
    )


def macro_f1(preds: Sequence[int], truths: Sequence[int], k: int = 8) -> float:
    return f1_report(confusion(preds, truths, k)).macro


def count_flips(labels: Sequence[int]) -> int:
    a = np.asarray(labels).reshape(-1)
    return int(np.count_nonzero(a[1:] != a[:-1]))


def flip_rate(labels: Sequence[int]) -> float:
    """Fraction of adjacent frame pairs whose labels differ (0 for one frame)."""
    n = len(labels)
    if n == 0:
        raise EmptyInputError("flip_rate of an empty sequence")
    if n == 1:
        return 0.0
    return count_flips(labels) / (n - 1)


def pooled_flip_rate(sequences: Sequence[Sequence[int]]) -> float:
    """Flip rate over several videos: total flips / total adjacent pairs."""
    flips = sum(count_flips(s) for s in sequences if len(s) > 1)
    pairs = sum(len(s) - 1 for s in sequences if len(s) > 1)
    return flips / pairs if pairs else 0.0


def report_csv(report: F1Report, class_names: Sequence[str]) -> str:
    """One row per class plus a macro row, four decimals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "precision", "recall", "f1", "support"])
    for i, name in enumerate(class_names):
        w.writerow(
            [
                name,
                f"{report.precision[i]:.4f}",
                f"{report.recall[i]:.4f}",
                f"{report.per_class[i]:.4f}",
                int(report.support[i]),
            ]
        )
    w.writerow(
        [
            "macro",
            f"{float(report.precision.mean()):.4f}",
            f"{float(report.recall.mean()):.4f}",
            f"{report.macro:.4f}",
            int(report.support.sum()),
        ]
    )
    return buf.getvalue()
