"""
metrics.py

Performance measures reported in ResultRows.

accuracy, fowlkes_mallows and homogeneity lie in [0, 1]; mse is >= 0.
"""

import math
from typing import Callable, Dict, Tuple

import numpy as np


class MetricError(Exception):
    """Raised for empty or unequal-length label vectors."""


def _vectors(truth, predicted) -> Tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.size == 0 or predicted.size == 0:
        raise MetricError("metrics need non-empty vectors")
    if truth.shape != predicted.shape:
        raise MetricError(f"length mismatch: {truth.shape} vs {predicted.shape}")
    return truth, predicted


def _contingency(truth: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    _, classes = np.unique(truth, return_inverse=True)
    _, clusters = np.unique(predicted, return_inverse=True)
    table = np.zeros((classes.max() + 1, clusters.max() + 1), dtype=np.int64)
    np.add.at(table, (classes, clusters), 1)
    return table


def _pairs(counts: np.ndarray) -> int:
    return int(sum(int(c) * (int(c) - 1) // 2 for c in counts.ravel()))


def metric_accuracy(truth, predicted) -> float:
    truth, predicted = _vectors(truth, predicted)
    return float(np.mean(truth == predicted))


def metric_mse(truth, predicted) -> float:
    truth, predicted = _vectors(truth, predicted)
    diff = truth.astype(float) - predicted.astype(float)
    return float(np.mean(diff * diff))


def metric_fowlkes_mallows(truth, predicted) -> float:
    """TP / sqrt((TP + FP)(TP + FN)) over sample pairs."""
    truth, predicted = _vectors(truth, predicted)
    table = _contingency(truth, predicted)
    tp = _pairs(table)
    tp_fp = _pairs(table.sum(axis=0))
    tp_fn = _pairs(table.sum(axis=1))
    if tp_fp == 0 and tp_fn == 0:
        return 1.0  # both partitions are all singletons
    if tp == 0:
        return 0.0
    return tp / math.sqrt(tp_fp * tp_fn)


def _entropy(counts: np.ndarray, total: int) -> float:
    result = 0.0
    for count in counts:
        if count:
            p = count / total
            result -= p * math.log(p)
    return result


def metric_homogeneity(truth, predicted) -> float:
    """1 - H(C|K) / H(C), with 1.0 when H(C) is 0."""
    truth, predicted = _vectors(truth, predicted)
    table = _contingency(truth, predicted)
    total = int(table.sum())
    class_entropy = _entropy(table.sum(axis=1), total)
    if class_entropy == 0.0:
        return 1.0

    cluster_sizes = table.sum(axis=0)
    conditional = 0.0
    for k in range(table.shape[1]):
        for count in table[:, k]:
            if count:
                conditional -= (count / total) * math.log(count / cluster_sizes[k])
    return min(1.0, max(0.0, 1.0 - conditional / class_entropy))


METRICS: Dict[str, Callable[..., float]] = {
    "accuracy": metric_accuracy,
    "mse": metric_mse,
    "fowlkes_mallows": metric_fowlkes_mallows,
    "homogeneity": metric_homogeneity,
}
