"""Held-out evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .dists import check_loss

__all__ = ["check_loss", "mwad", "error_rate", "auc"]


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def mwad(pred, actual, tau: float, flip: bool = False) -> float:
    """Mean weighted absolute deviation, the average check loss of ``pred - actual``.

    ``flip=True`` uses ``actual - pred`` instead, the more common convention.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    pred, actual = _pair(pred, actual)
    resid = actual - pred if flip else pred - actual
    return float(np.mean(check_loss(resid, tau)))


def error_rate(pred_labels, actual_labels) -> float:
    pred, actual = _pair(pred_labels, actual_labels)
    return float(np.mean(pred != actual))


def auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic, ties counted half."""
    scores, labels = _pair(scores, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
