"""Clustering quality metrics: ACC, NMI, ARI and macro F1.

ACC and F1 first align predicted cluster ids to true class ids with an
optimal one-to-one matching, so both are asymmetric in their arguments.
NMI and ARI are symmetric.  All four are invariant to relabelling the
predicted clusters.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError


def _labels(y_true, y_pred):
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.shape != y_pred.shape:
        raise ContractError(f"label vectors differ in length: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise ContractError("label vectors must be non-empty")
    return y_true, y_pred


def contingency(y_true, y_pred):
    """Counts table with rows = true classes, cols = predicted clusters.

    Returns ``(table, classes, clusters)`` where the last two are the sorted
    distinct ids.
    """
    y_true, y_pred = _labels(y_true, y_pred)
    classes, ti = np.unique(y_true, return_inverse=True)
    clusters, pi = np.unique(y_pred, return_inverse=True)
    table = np.zeros((len(classes), len(clusters)), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table, classes, clusters


def hungarian_match(cost) -> np.ndarray:
    """Permutation ``perm`` minimising ``sum_i cost[i, perm[i]]``."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ContractError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ContractError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=np.int64)
    perm[rows] = cols
    return perm


def _aligned(y_true, y_pred):
    """Map every predicted cluster to a true class id (or a fresh id if unmatched)."""
    table, classes, clusters = contingency(y_true, y_pred)
    k = max(table.shape)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    perm = hungarian_match(-padded)  # perm[class_row] = cluster_col
    spare = int(np.max(classes)) + 1
    mapping = {}
    for row, col in enumerate(perm):
        if col >= len(clusters):
            continue
        if row < len(classes):
            mapping[clusters[col]] = classes[row]
        else:
            mapping[clusters[col]] = spare + row
    return table, padded, perm, mapping


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = _labels(y_true, y_pred)
    _, padded, perm, _ = _aligned(y_true, y_pred)
    return float(padded[np.arange(len(perm)), perm].sum()) / y_true.size


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(y_true, y_pred) -> float:
    """Mutual information over the arithmetic mean of the two entropies.

    Defined as 0 whenever the mutual information is 0, including the case
    where either labelling has a single cluster.
    """
    table, _, _ = contingency(y_true, y_pred)
    n = table.sum()
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(table.sum(1), table.sum(0))[nz] / (n * n)
    mi = float((joint * (np.log(joint) - np.log(outer))).sum())
    h_true, h_pred = _entropy(table.sum(1)), _entropy(table.sum(0))
    if mi <= 0 or h_true == 0 or h_pred == 0:
        return 0.0
    return float(np.clip(mi / ((h_true + h_pred) / 2.0), 0.0, 1.0))


def _pairs(x):
    x = np.asarray(x, dtype=np.float64)
    return (x * (x - 1) / 2.0).sum()


def ari(y_true, y_pred) -> float:
    y_true, _ = _labels(y_true, y_pred)
    if y_true.size < 2:
        raise ContractError("ARI needs at least two samples")
    table, _, _ = contingency(y_true, y_pred)
    index = _pairs(table)
    a, b = _pairs(table.sum(1)), _pairs(table.sum(0))
    expected = a * b / _pairs([y_true.size])
    max_index = (a + b) / 2.0
    if max_index == expected:
        # both partitions trivial (all-in-one or all-singletons)
        return 1.0
    return float((index - expected) / (max_index - expected))


def macro_f1(y_true, y_pred) -> float:
    """Mean per-class F1 after optimal cluster-to-class alignment."""
    y_true, y_pred = _labels(y_true, y_pred)
    _, _, _, mapping = _aligned(y_true, y_pred)
    aligned = np.array([mapping[c] for c in y_pred])
    scores = []
    for cls in np.unique(y_true):
        tp = np.sum((aligned == cls) & (y_true == cls))
        n_pred = np.sum(aligned == cls)
        n_true = np.sum(y_true == cls)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_true
        denom = precision + recall
        scores.append(2 * precision * recall / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def evaluate(y_true, y_pred) -> dict[str, float]:
    return {"acc": accuracy(y_true, y_pred), "nmi": nmi(y_true, y_pred),
            "ari": ari(y_true, y_pred), "f1": macro_f1(y_true, y_pred)}
