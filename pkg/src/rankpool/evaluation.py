"""Classification metrics for encoded sequences."""

from __future__ import annotations

import numpy as np


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=int)
    labels = np.asarray(labels, dtype=int)
    return float(np.mean(predicted == labels)) if labels.size else 0.0


def per_class_accuracy(predicted: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Accuracy per class; classes absent from labels report nan."""
    predicted = np.asarray(predicted, dtype=int)
    labels = np.asarray(labels, dtype=int)
    out = np.full(n_classes, np.nan)
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            out[c] = float(np.mean(predicted[mask] == c))
    return out


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-of-positives AP: mean of precision at each positive's rank.

    Ties in score break by original index, so the value is deterministic.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    order = np.lexsort((np.arange(scores.size), -scores))
    hits = positives[order]
    total = int(hits.sum())
    if total == 0:
        return float("nan")
    ranks = np.flatnonzero(hits) + 1
    found = np.arange(1, total + 1)
    return float(np.mean(found / ranks))


def mean_average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean AP over the classes that have at least one positive."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    labels = np.asarray(labels, dtype=int)
    values = []
    for c in range(scores.shape[1]):
        positives = labels == c
        if positives.any():
            values.append(average_precision(scores[:, c], positives))
    return float(np.mean(values)) if values else float("nan")
