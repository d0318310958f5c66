"""Agreement and classification metrics for ordinal essay scores.

Quadratic-weighted kappa is the headline metric; the binary kappa,
per-class precision/recall/F1 and Spearman correlation support the
per-class diagnostics on the imbalanced 0-4 scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "UndefinedMetricError",
    "BinaryCounts",
    "EvalReport",
    "confusion",
    "qwk",
    "binary_kappa",
    "per_class_prf",
    "spearman",
    "binarize_class",
    "EVAL_REPORT_HEADER",
]

EVAL_REPORT_HEADER = "model_id,source,qwk,spearman,f1_0,f1_1,f1_2,f1_3,f1_4"


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value (e.g. constant inputs)."""


@dataclass(frozen=True)
class BinaryCounts:
    """One-vs-rest counts for a single score class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(truth: Sequence[int], pred: Sequence[int], k: int) -> np.ndarray:
    """K x K count matrix, rows = truth, columns = prediction."""
    t = np.asarray(truth, dtype=int)
    p = np.asarray(pred, dtype=int)
    if t.size == 0:
        raise ValueError("confusion: empty label sequences")
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"confusion: length mismatch ({t.shape} vs {p.shape})")
    for name, arr in (("truth", t), ("pred", p)):
        if arr.min() < 0 or arr.max() >= k:
            raise ValueError(f"confusion: {name} label out of range [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def qwk(truth: Sequence[int], pred: Sequence[int], k: int = 5) -> float:
    """Quadratic-weighted kappa on integer labels in [0, k).

    kappa = 1 - sum(w * O) / sum(w * E) with w_ij = (i - j)^2 / (k - 1)^2,
    O the observed confusion matrix and E the outer product of marginals
    scaled to the same total.
    """
    cm = confusion(truth, pred, k).astype(float)
    idx = np.arange(k, dtype=float)
    w = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2
    n = cm.sum()
    expected = np.outer(cm.sum(axis=1), cm.sum(axis=0)) / n
    denom = float((w * expected).sum())
    if denom == 0.0:
        raise UndefinedMetricError(
            "qwk undefined: zero expected disagreement (constant and equal sequences)"
        )
    return 1.0 - float((w * cm).sum()) / denom


def binary_kappa(c: BinaryCounts) -> float:
    """Two-class kappa from one-vs-rest counts.

    kappa = 2(TP*TN - FN*FP) / ((TP+FP)(FP+TN) + (TP+FN)(FN+TN))
    """
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    denom = (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn)
    if denom == 0:
        raise UndefinedMetricError("binary kappa undefined: zero denominator")
    return 2.0 * (tp * tn - fn * fp) / denom


def binarize_class(cm: np.ndarray, cls: int) -> BinaryCounts:
    """Collapse a K x K confusion matrix to one-vs-rest counts for `cls`."""
    tp = int(cm[cls, cls])
    fp = int(cm[:, cls].sum() - tp)
    fn = int(cm[cls, :].sum() - tp)
    tn = int(cm.sum() - tp - fp - fn)
    return BinaryCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def per_class_prf(cm: np.ndarray) -> list[tuple[float, float, float]]:
    """Per-class (precision, recall, f1) with the 0/0 -> 0 convention.

    recall = TP / (TP + FN), precision = TP / (TP + FP),
    f1 = 2*TP / (2*TP + FP + FN).
    """
    out = []
    for cls in range(cm.shape[0]):
        b = binarize_class(cm, cls)
        precision = b.tp / (b.tp + b.fp) if b.tp + b.fp else 0.0
        recall = b.tp / (b.tp + b.fn) if b.tp + b.fn else 0.0
        f1_denom = 2 * b.tp + b.fp + b.fn
        f1 = 2 * b.tp / f1_denom if f1_denom else 0.0
        out.append((precision, recall, f1))
    return out


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; ties receive the mean rank of their block."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=float)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1 or xa.size < 2:
        raise ValueError("spearman: need two equal-length sequences of size >= 2")
    if np.unique(xa).size < 2 or np.unique(ya).size < 2:
        raise UndefinedMetricError("spearman undefined: constant sequence")
    rx = _average_ranks(xa)
    ry = _average_ranks(ya)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


@dataclass(frozen=True)
class EvalReport:
    """One model's test-split performance row."""

    model_id: str
    source_tag: str
    qwk: float | None
    spearman: float | None
    f1_per_class: tuple[float, ...]

    def csv_row(self) -> str:
        def fmt(v: float | None) -> str:
            return "NA" if v is None else f"{v:.4f}"

        f1s = ",".join(f"{v:.4f}" for v in self.f1_per_class)
        return f"{self.model_id},{self.source_tag},{fmt(self.qwk)},{fmt(self.spearman)},{f1s}"
