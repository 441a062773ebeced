"""Accuracy, ROC AUC and per-class recall."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from spsl.exceptions import InvalidInputError, UndefinedMetricError


def _predicted_labels(predictions) -> np.ndarray:
    p = np.asarray(predictions)
    return p.argmax(axis=1) if p.ndim == 2 else p.astype(int)


def accuracy(predictions, labels) -> float:
    """Fraction of correct predictions. ``predictions`` are labels or per-class scores."""
    pred = _predicted_labels(predictions)
    labels = np.asarray(labels, dtype=int)
    if pred.size == 0:
        raise InvalidInputError("empty input")
    if pred.shape != labels.shape:
        raise InvalidInputError(f"length mismatch: {pred.shape} vs {labels.shape}")
    return float(np.mean(pred == labels))


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    # tie groups share the mean of their 1-based positions
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(x)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InvalidInputError("scores and labels must be 1D arrays of equal length")
    if not np.all(np.isin(labels, (0, 1))):
        raise InvalidInputError("labels must be 0/1")
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("scores must be finite")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = _midranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def recall_per_class(predictions, labels, n_classes: int | None = None) -> dict[int, float]:
    """Recall for each class that has samples; absent classes are left out."""
    pred = _predicted_labels(predictions)
    labels = np.asarray(labels, dtype=int)
    if pred.shape != labels.shape:
        raise InvalidInputError(f"length mismatch: {pred.shape} vs {labels.shape}")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    out = {}
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            out[c] = float(np.mean(pred[mask] == c))
    return out


@dataclass
class MetricsReport:
    acc: float
    auc: float | None
    recall: dict[int, float]
    n_samples: int
    class_counts: dict[int, int]
    config: dict = field(default_factory=dict)

    @classmethod
    def from_probabilities(cls, proba, labels, config: dict | None = None) -> "MetricsReport":
        proba = np.asarray(proba, dtype=float)
        labels = np.asarray(labels, dtype=int)
        n_classes = proba.shape[1]
        try:
            auc = auc_roc(proba[:, 1], labels) if n_classes == 2 else None
        except UndefinedMetricError:
            auc = None
        counts = {c: int((labels == c).sum()) for c in range(n_classes)}
        return cls(
            acc=accuracy(proba, labels),
            auc=auc,
            recall=recall_per_class(proba, labels, n_classes),
            n_samples=len(labels),
            class_counts=counts,
            config=dict(config or {}),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recall"] = {str(k): v for k, v in self.recall.items()}
        d["class_counts"] = {str(k): v for k, v in self.class_counts.items()}
        return d
