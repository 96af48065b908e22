"""Ranking metrics over scored dyads.

Both metrics see scores and binary labels as flat vectors; callers ravel
matrices or gather dyad subsets first. Ties are handled explicitly: AUROC
counts tied positive-negative pairs as half (Mann-Whitney), and AUPRC
groups equal scores into a single cut so the result cannot depend on an
arbitrary sort order within a tie.
"""

from __future__ import annotations

import numpy as np

from .errors import UndefinedMetricError, UsageError


def _scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.shape[0] != y.shape[0]:
        raise UsageError(
            f"scores and labels disagree in length: {s.shape[0]} vs "
            f"{y.shape[0]}")
    if s.shape[0] == 0:
        raise UsageError("empty score vector")
    if not np.isfinite(s).all():
        raise UsageError("scores contain non-finite values")
    if not np.isin(y, (0.0, 1.0)).all():
        raise UsageError("labels must be binary")
    return s, y


def _tie_ranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    vals, inv, counts = np.unique(s, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    return (0.5 * (starts + ends))[inv]


def auroc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative,
    ties counted one half."""
    s, y = _scores_labels(scores, labels)
    pos = y == 1.0
    n_pos = int(pos.sum())
    n_neg = s.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"auroc needs both classes; got {n_pos} positives and "
            f"{n_neg} negatives")
    ranks = _tie_ranks(s)
    u = ranks[pos].sum() - 0.5 * n_pos * (n_pos + 1)
    return float(u / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision with equal scores grouped into one cut.

    Sum over descending score groups of (precision after the group) x
    (recall gained by the group).
    """
    s, y = _scores_labels(scores, labels)
    n_pos = y.sum()
    if n_pos == 0:
        raise UndefinedMetricError("auprc needs at least one positive")
    vals, inv, counts = np.unique(s, return_inverse=True, return_counts=True)
    tp_per = np.bincount(inv, weights=y, minlength=vals.shape[0])
    tp_desc = tp_per[::-1]
    n_desc = counts[::-1].astype(np.float64)
    cum_tp = np.cumsum(tp_desc)
    cum_n = np.cumsum(n_desc)
    precision = cum_tp / cum_n
    return float(np.sum(precision * (tp_desc / n_pos)))
