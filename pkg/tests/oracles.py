"""Reference implementations the test suite compares the package against.

Everything here is deliberately naive: explicit loops, full re-aggregation
per candidate, dense solves. Oracles trade speed for obviousness; nothing
in the package imports this module.
"""

import numpy as np


def matmul_oracle(a, b):
    """Triple-loop matrix product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def block_stats(block):
    """[count, sum, sum of squares] of a block, flattened."""
    flat = np.asarray(block, dtype=np.float64).ravel()
    return float(flat.size), float(flat.sum()), float((flat * flat).sum())


def _var(s0, s1, s2):
    if s0 == 0.0:
        return 0.0
    m = s1 / s0
    v = s2 / s0 - m * m
    return v if v > 0.0 else 0.0


def split_delta_oracle(block, axis, mask, n_norm):
    """Impurity decrease of splitting `block` along `axis` by `mask`.

    Both children are re-aggregated from scratch; returns the raw
    (unclamped) normalized decrease.
    """
    block = np.asarray(block, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if axis == 0:
        left, right = block[mask, :], block[~mask, :]
    else:
        left, right = block[:, mask], block[:, ~mask]
    n0, n1, n2 = block_stats(block)
    l0, l1, l2 = block_stats(left)
    r0, r1, r2 = block_stats(right)
    return (n0 * _var(n0, n1, n2)
            - l0 * _var(l0, l1, l2)
            - r0 * _var(r0, r1, r2)) / float(n_norm)


def argmax_split_oracle(x1, x2, y, rows, cols, cands, min_rows, min_cols,
                        n_norm, floor=-1e-12):
    """Re-score (axis, feature, threshold) candidates from scratch and pick
    the winner under the documented order: largest delta, ties broken by
    the smallest (axis, feature, threshold) triple.

    Returns (best, scored) where best is (delta, axis, feature, threshold)
    or None when no candidate is feasible, and scored lists every candidate
    as (axis, feature, threshold, clamped delta, n_left, feasible).
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    blk = np.asarray(y, dtype=np.float64)[np.ix_(rows, cols)]
    best = None
    scored = []
    for axis, f, thr in cands:
        if axis == 0:
            mask = np.asarray(x1)[rows, f] <= thr
            seg, min_here = rows.shape[0], min_rows
        else:
            mask = np.asarray(x2)[cols, f] <= thr
            seg, min_here = cols.shape[0], min_cols
        n_left = int(mask.sum())
        feasible = n_left >= min_here and seg - n_left >= min_here
        d = max(split_delta_oracle(blk, axis, mask, n_norm), floor)
        scored.append((axis, f, thr, d, n_left, feasible))
        if not feasible:
            continue
        if best is None or d > best[0] or (
                d == best[0] and (axis, f, thr) < best[1:]):
            best = (d, axis, f, thr)
    return best, scored


def walk_tree_oracle(nd_axis, nd_feat, nd_thr, nd_left, nd_right,
                     x1_row, x2_row):
    """Pure-python root-to-leaf walk; value <= threshold goes left."""
    nid = 0
    while nd_axis[nid] != -1:
        v = x1_row[nd_feat[nid]] if nd_axis[nid] == 0 \
            else x2_row[nd_feat[nid]]
        nid = nd_left[nid] if v <= nd_thr[nid] else nd_right[nid]
    return int(nid)


def kron_ridge_oracle(phi1, phi2, y, alpha, phi1_test, phi2_test):
    """Dense (phi1 (x) phi2 + alpha I) ridge solve, row-major vec order."""
    phi1 = np.asarray(phi1, dtype=np.float64)
    phi2 = np.asarray(phi2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = y.shape
    big = np.kron(phi1, phi2) + alpha * np.eye(n1 * n2)
    coef = np.linalg.solve(big, y.reshape(-1)).reshape(n1, n2)
    return phi1_test @ coef @ phi2_test.T


def auroc_oracle(scores, labels):
    """O(n_pos x n_neg) pairwise comparison, ties worth one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    pos = s[y == 1.0]
    neg = s[y == 0.0]
    diff = pos[:, None] - neg[None, :]
    wins = float((diff > 0.0).sum()) + 0.5 * float((diff == 0.0).sum())
    return wins / (pos.size * neg.size)


def auprc_oracle(scores, labels):
    """Average precision by one full pass per distinct cut, descending."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    n_pos = float(y.sum())
    ap = 0.0
    prev_recall = 0.0
    for c in np.unique(s)[::-1]:
        keep = s >= c
        tp = float(y[keep].sum())
        ap += (tp / float(keep.sum())) * (tp / n_pos - prev_recall)
        prev_recall = tp / n_pos
    return ap
