"""Confusion-matrix metrics and trapezoidal ROC AUC.

Conventions, pinned by tests against brute-force oracles:
  - precision, recall and F1 are 0 whenever their denominator is 0;
  - AUC over a single-class label set is 0.5 (no ranking information);
  - the ROC is built over unique score thresholds, so the trapezoid rule
    equals pair counting with ties scored 1/2.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["compute_metrics", "roc_points", "auc_trapezoid"]


def roc_points(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) swept over the unique score thresholds, highest first."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    tps: list[int] = [0]
    fps: list[int] = [0]
    tp = fp = 0
    i = 0
    while i < len(y):
        j = i
        while j < len(y) and s[j] == s[i]:
            j += 1
        block = int(y[i:j].sum())
        tp += block
        fp += (j - i) - block
        tps.append(tp)
        fps.append(fp)
        i = j
    tpr = np.array(tps) / n_pos if n_pos else np.zeros(len(tps))
    fpr = np.array(fps) / n_neg if n_neg else np.zeros(len(fps))
    return fpr, tpr


def auc_trapezoid(scores: np.ndarray, labels: np.ndarray) -> float:
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        return 0.5
    fpr, tpr = roc_points(scores, labels)
    return float(np.trapezoid(tpr, fpr))


def compute_metrics(scores: Sequence[float], labels: Sequence[int],
                    threshold: float = 0.5) -> dict[str, float]:
    """Accuracy, AUC, F1, precision, recall at the given threshold.

    Predictions are crossing exactly when score >= threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.size == 0:
        raise ValueError("compute_metrics needs at least one score")
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    pred = (s >= threshold).astype(np.int64)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    accuracy = (tp + tn) / len(y)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": accuracy,
        "auc": auc_trapezoid(s, y),
        "f1": f1,
        "precision": precision,
        "recall": recall,
    }
