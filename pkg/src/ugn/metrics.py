"""Evaluation measures: accuracy/P/R/F1, AUPRC, Pearson, HITS@1."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class MetricReport:
    values: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def __getitem__(self, key):
        return self.values[key]

    def to_text(self) -> str:
        """Flat ``key<TAB>value`` lines, in insertion order."""
        lines = [f"{k}\t{_fmt(v)}" for k, v in self.values.items()]
        lines += [f"n_{k}\t{v}" for k, v in self.counts.items()]
        if self.seed is not None:
            lines.append(f"seed\t{self.seed}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricReport":
        rep = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            k, v = line.split("\t", 1)
            if k == "seed":
                rep.seed = int(v)
            elif k.startswith("n_"):
                rep.counts[k[2:]] = int(v)
            else:
                rep.values[k] = float(v)
        return rep


def _fmt(v) -> str:
    return repr(float(v))


def argmax_rows(scores) -> np.ndarray:
    """Row argmax; ties resolve to the lowest class index."""
    return np.asarray(scores).argmax(axis=1)


def classification_metrics(pred, truth) -> MetricReport:
    """Accuracy plus macro-averaged precision, recall and F1."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction")
    classes = np.union1d(pred, truth)
    p, r, f = [], [], []
    for c in classes:
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        p.append(prec)
        r.append(rec)
        f.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    values = {"accuracy": float(np.mean(pred == truth)), "precision": float(np.mean(p)),
              "recall": float(np.mean(r)), "f1": float(np.mean(f))}
    return MetricReport(values, {"samples": int(pred.size)})


def auprc(scores, labels) -> float:
    """Area under the precision-recall step curve.

    Equal scores form one threshold; the area is ``sum (R_k - R_{k-1}) P_k``
    over distinct thresholds in decreasing order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = int(labels.sum())
    if pos == 0 or pos == labels.size:
        raise ValueError("AUPRC needs both positive and negative labels")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def pearson(x, y) -> float:
    """Sample correlation; square matrices use their strict upper triangle."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 2 and x.shape[0] == x.shape[1]:
        iu = np.triu_indices(x.shape[0], k=1)
        x, y = x[iu], y[iu]
    x, y = x.ravel(), y.ravel()
    if x.size < 2:
        raise ValueError("need at least two values")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(xc @ xc), np.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise ValueError("zero variance")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def hits_at_1(predicted, truth) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.size == 0:
        raise ValueError("empty query set")
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    return float(np.mean(predicted == truth))
