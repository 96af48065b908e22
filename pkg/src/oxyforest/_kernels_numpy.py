"""Pure-numpy implementations of the hot kernels.

This module is the reference semantics; `_kernels_numba` compiles the same
algorithms. For binary interaction matrices every split statistic is an exact
integer in float64, so the two backends produce bit-identical trees (see
tests/test_backends.py). Shared conventions:

* a node's candidate stream is SplitMix64 seeded with
  ``derive_seed(tree_seed, node_id)``; per node, each axis first consumes one
  bounded draw per sampled feature (partial Fisher-Yates), then one uniform
  per non-constant feature for its threshold (random mode only),
* values equal to the threshold go to the left child,
* the right child's statistics are the node's minus the left child's,
* equal gains break ties toward the lowest (axis, feature, threshold),
* index segments are never mutated in place; partitions copy out, so parent
  segments stay valid and both children of a column split may share the row
  segment (and vice versa).
"""

from __future__ import annotations

import numpy as np

from .rng import GAMMA, MASK64, mix64

DELTA_FLOOR = -1e-12
_UNIT = 2.0 ** -53

LEAF = -1
AXIS_ROWS = 0
AXIS_COLS = 1


# ---------------------------------------------------------------------------
# impurity arithmetic (identical expression order in both backends)

def _impurity(s0: float, s1: float, s2: float) -> float:
    m = s1 / s0
    val = s2 / s0 - m * m
    if val < 0.0:
        val = 0.0
    return val


def _delta(n0, n1, n2, l0, l1, l2, n_norm):
    r0 = n0 - l0
    r1 = n1 - l1
    r2 = n2 - l2
    d = (
        n0 * _impurity(n0, n1, n2)
        - l0 * _impurity(l0, l1, l2)
        - r0 * _impurity(r0, r1, r2)
    ) / n_norm
    if d < DELTA_FLOOR:
        d = DELTA_FLOOR
    return d


def _delta_sides(n0, n1, n2, l0, l1, l2, r0, r1, r2, n_norm):
    """Impurity decrease with both children's stats measured directly.

    Matches _delta bit for bit on binary outputs, where every sum is an
    exact integer either way.
    """
    d = (
        n0 * _impurity(n0, n1, n2)
        - l0 * _impurity(l0, l1, l2)
        - r0 * _impurity(r0, r1, r2)
    ) / n_norm
    if d < DELTA_FLOOR:
        d = DELTA_FLOOR
    return d


# ---------------------------------------------------------------------------
# SplitMix64 on masked python ints (wraparound matches uint64 exactly)

def _sm_draw(state: int):
    state = (state + GAMMA) & MASK64
    return state, mix64(state)


def _node_seed(tree_seed: int, node_id: int) -> int:
    return mix64((tree_seed + GAMMA * (node_id + 1)) & MASK64)


def sample_features(m: int, k: int, state: int):
    """Partial Fisher-Yates: k distinct features out of m, k bounded draws."""
    pool = np.arange(m, dtype=np.int64)
    for t in range(k):
        state, z = _sm_draw(state)
        j = t + z % (m - t)
        pool[t], pool[j] = pool[j], pool[t]
    return pool[:k], state


# ---------------------------------------------------------------------------
# Jacobi eigendecomposition

def jacobi_eigh(a: np.ndarray, tol_factor: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns, converged, sweeps).
    Convergence: off-diagonal Frobenius norm <= tol_factor times the
    Frobenius norm of the input.
    """
    n = a.shape[0]
    w = a.copy()
    v = np.eye(n)
    if n < 2:
        return np.diag(w).copy(), v, True, 0
    threshold = tol_factor * np.sqrt((a * a).sum())
    sweeps = 0
    while sweeps < max_sweeps:
        off = w.copy()
        np.fill_diagonal(off, 0.0)
        if np.sqrt((off * off).sum()) <= threshold:
            return np.diag(w).copy(), v, True, sweeps
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if apq == 0.0:
                    continue
                tau = (w[q, q] - w[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                colp = w[:, p].copy()
                colq = w[:, q].copy()
                w[:, p] = c * colp - s * colq
                w[:, q] = s * colp + c * colq
                rowp = w[p, :].copy()
                rowq = w[q, :].copy()
                w[p, :] = c * rowp - s * rowq
                w[q, :] = s * rowp + c * rowq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    off = w.copy()
    np.fill_diagonal(off, 0.0)
    converged = bool(np.sqrt((off * off).sum()) <= threshold)
    return np.diag(w).copy(), v, converged, sweeps


# ---------------------------------------------------------------------------
# proxy statistics and split scoring

def proxy_stats(y: np.ndarray, row_idx: np.ndarray, col_idx: np.ndarray):
    """Per-row and per-column [count, sum, sum of squares] of a Y block."""
    blk = y[np.ix_(row_idx, col_idx)]
    sq = blk * blk
    k1 = row_idx.shape[0]
    k2 = col_idx.shape[0]
    p1 = np.empty((k1, 3))
    p1[:, 0] = k2
    p1[:, 1] = blk.sum(axis=1)
    p1[:, 2] = sq.sum(axis=1)
    p2 = np.empty((k2, 3))
    p2[:, 0] = k1
    p2[:, 1] = blk.sum(axis=0)
    p2[:, 2] = sq.sum(axis=0)
    return p1, p2


def scan_thresholds(proxy: np.ndarray, values: np.ndarray, thresholds: np.ndarray,
                    n_norm: float):
    """Gain of every threshold via prefix sums over feature-sorted proxy rows.

    Thresholds must be ascending. A threshold that leaves either side empty
    scores -inf. Returns (deltas, n_left).
    """
    k = values.shape[0]
    order = np.argsort(values, kind="stable")
    sv = values[order]
    prefix = np.zeros((k + 1, 3))
    np.cumsum(proxy[order], axis=0, out=prefix[1:])
    total = prefix[k]
    nn = n_norm if n_norm > 0 else total[0]
    pos = np.searchsorted(sv, thresholds, side="right")
    deltas = np.empty(thresholds.shape[0])
    for i in range(thresholds.shape[0]):
        p = pos[i]
        if p == 0 or p == k:
            deltas[i] = -np.inf
            continue
        l0, l1, l2 = prefix[p]
        deltas[i] = _delta(total[0], total[1], total[2], l0, l1, l2, nn)
    return deltas, pos.astype(np.int64)


# ---------------------------------------------------------------------------
# tree growth

def _node_stats(blk: np.ndarray):
    s1 = float(blk.sum())
    s2 = float((blk * blk).sum())
    return float(blk.size), s1, s2


def _score_candidates(x, idx, axis, feats, state, min_here, other_len,
                      p_axis, blk, node, n_norm, exhaustive, naive, trace,
                      node_id):
    """Score one axis' sampled features; returns (best tuple, state)."""
    best = None
    seg = idx.shape[0]
    for f in feats:
        vals = x[idx, f]
        lo = vals.min()
        hi = vals.max()
        if hi <= lo:
            continue
        if exhaustive:
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            cuts = [(0.5 * (sv[p] + sv[p + 1]), p + 1)
                    for p in range(seg - 1) if sv[p] < sv[p + 1]]
        else:
            state, z = _sm_draw(state)
            u = (z >> 11) * _UNIT
            cuts = [(lo + u * (hi - lo), -1)]
        for thr, _ in cuts:
            mask = vals <= thr
            n_left = int(mask.sum())
            feasible = n_left >= min_here and (seg - n_left) >= min_here
            if naive:
                if axis == AXIS_ROWS:
                    left, right = blk[mask, :], blk[~mask, :]
                else:
                    left, right = blk[:, mask], blk[:, ~mask]
                l0 = float(left.size)
                l1 = float(left.sum())
                l2 = float((left * left).sum())
                r1 = float(right.sum())
                r2 = float((right * right).sum())
                d = _delta_sides(node[0], node[1], node[2], l0, l1, l2,
                                 node[0] - l0, r1, r2, n_norm)
            else:
                l0 = float(n_left) * other_len
                l1 = float(p_axis[mask, 1].sum())
                l2 = float(p_axis[mask, 2].sum())
                d = _delta(node[0], node[1], node[2], l0, l1, l2, n_norm)
            if trace is not None:
                trace.candidates.append(
                    (node_id, axis, int(f), float(thr), d, n_left, feasible))
            if not feasible:
                continue
            if best is None or d > best[0] or (
                d == best[0]
                and (axis, f, thr) < (best[1], best[2], best[3])
            ):
                best = (d, axis, int(f), float(thr))
    return best, state


class GrowTrace:
    """Per-candidate scoring record collected by the reference builder."""

    def __init__(self):
        self.candidates = []   # (node_id, axis, feature, threshold, delta, n_left, feasible)
        self.nodes = []        # (node_id, row_idx, col_idx, chosen or None)


def _pack_segments(segments):
    """Flatten a list of index arrays into (buffer, offsets, lengths)."""
    lens = np.array([s.shape[0] for s in segments], dtype=np.int64)
    offs = np.zeros(lens.shape[0], dtype=np.int64)
    if lens.shape[0] > 1:
        np.cumsum(lens[:-1], out=offs[1:])
    buf = (np.concatenate(segments) if segments
           else np.empty(0, dtype=np.int64))
    return buf, offs, lens


def grow_tree(x1, x2, y, row_idx0, col_idx0, min_rows, min_cols,
              mf_rows, mf_cols, n_norm_in, tree_seed,
              naive_eval=False, exhaustive=False, trace=None):
    """Grow a biclustering tree; see the module docstring for conventions.

    Returns (axis, feature, threshold, left, right, leaf) parallel node
    arrays (axis == -1 marks leaves) followed by the leaf row segments and
    leaf col segments, each packed as (buffer, offsets, lengths).
    """
    nd_axis = []
    nd_feat = []
    nd_thr = []
    nd_left = []
    nd_right = []
    nd_leaf = []
    leaf_rows = []
    leaf_cols = []

    def new_node():
        nd_axis.append(LEAF)
        nd_feat.append(-1)
        nd_thr.append(0.0)
        nd_left.append(-1)
        nd_right.append(-1)
        nd_leaf.append(-1)
        return len(nd_axis) - 1

    root = new_node()
    stack = [(root, np.asarray(row_idx0, dtype=np.int64),
              np.asarray(col_idx0, dtype=np.int64))]
    while stack:
        nid, rows, cols = stack.pop()
        blk = y[np.ix_(rows, cols)]
        s0, s1, s2 = _node_stats(blk)
        pure = s0 * s2 == s1 * s1
        can_row = rows.shape[0] >= 2 * min_rows
        can_col = cols.shape[0] >= 2 * min_cols
        best = None
        if not pure and (can_row or can_col):
            n_norm = n_norm_in if n_norm_in > 0 else s0
            node = (s0, s1, s2)
            if naive_eval:
                p1 = p2 = None
            else:
                p1, p2 = proxy_stats(y, rows, cols)
            state = _node_seed(tree_seed, nid)
            for axis, idx, x, m_feat, mf, min_here, other in (
                (AXIS_ROWS, rows, x1, x1.shape[1], mf_rows, min_rows, cols),
                (AXIS_COLS, cols, x2, x2.shape[1], mf_cols, min_cols, rows),
            ):
                k = min(mf, m_feat)
                feats, state = sample_features(m_feat, k, state)
                cand, state = _score_candidates(
                    x, idx, axis, feats, state, min_here,
                    float(other.shape[0]),
                    p1 if axis == AXIS_ROWS else p2,
                    blk, node, n_norm, exhaustive, naive_eval, trace, nid)
                if cand is not None and (
                    best is None or cand[0] > best[0] or (
                        cand[0] == best[0] and cand[1:] < best[1:])
                ):
                    best = cand
        if best is None:
            nd_leaf[nid] = len(leaf_rows)
            leaf_rows.append(rows)
            leaf_cols.append(cols)
            if trace is not None:
                trace.nodes.append((nid, rows, cols, None))
            continue
        _, axis, feat, thr = best
        if axis == AXIS_ROWS:
            mask = x1[rows, feat] <= thr
            l_rows, r_rows = rows[mask], rows[~mask]
            l_cols = r_cols = cols
        else:
            mask = x2[cols, feat] <= thr
            l_cols, r_cols = cols[mask], cols[~mask]
            l_rows = r_rows = rows
        left = new_node()
        right = new_node()
        nd_axis[nid] = axis
        nd_feat[nid] = feat
        nd_thr[nid] = thr
        nd_left[nid] = left
        nd_right[nid] = right
        if trace is not None:
            trace.nodes.append((nid, rows, cols, (axis, feat, thr)))
        stack.append((right, r_rows, r_cols))
        stack.append((left, l_rows, l_cols))
    rows_packed = _pack_segments(leaf_rows)
    cols_packed = _pack_segments(leaf_cols)
    return (
        np.asarray(nd_axis, dtype=np.int64),
        np.asarray(nd_feat, dtype=np.int64),
        np.asarray(nd_thr, dtype=np.float64),
        np.asarray(nd_left, dtype=np.int64),
        np.asarray(nd_right, dtype=np.int64),
        np.asarray(nd_leaf, dtype=np.int64),
    ) + rows_packed + cols_packed


# ---------------------------------------------------------------------------
# inference

def assign_leaves(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    """Partition the test grid down the tree.

    Each split partitions its own axis' index segment; the other axis passes
    to both children unchanged. Returns (leaf node ids, packed row segments,
    packed col segments) in depth-first left-to-right order.
    """
    node_ids = []
    row_segs = []
    col_segs = []
    stack = [(0, np.arange(x1t.shape[0], dtype=np.int64),
              np.arange(x2t.shape[0], dtype=np.int64))]
    while stack:
        nid, rows, cols = stack.pop()
        axis = nd_axis[nid]
        if axis == LEAF:
            node_ids.append(nid)
            row_segs.append(rows)
            col_segs.append(cols)
            continue
        if axis == AXIS_ROWS:
            mask = x1t[rows, nd_feat[nid]] <= nd_thr[nid]
            l = (nd_left[nid], rows[mask], cols)
            r = (nd_right[nid], rows[~mask], cols)
        else:
            mask = x2t[cols, nd_feat[nid]] <= nd_thr[nid]
            l = (nd_left[nid], rows, cols[mask])
            r = (nd_right[nid], rows, cols[~mask])
        if r[1].shape[0] and r[2].shape[0]:
            stack.append(r)
        if l[1].shape[0] and l[2].shape[0]:
            stack.append(l)
    ids = np.asarray(node_ids, dtype=np.int64)
    return (ids,) + _pack_segments(row_segs) + _pack_segments(col_segs)


def traverse_grid(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    """Leaf node id for every dyad, each walking the tree independently."""
    t1 = x1t.shape[0]
    t2 = x2t.shape[0]
    ii, jj = np.meshgrid(np.arange(t1), np.arange(t2), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    cur = np.zeros(t1 * t2, dtype=np.int64)
    active = nd_axis[cur] != LEAF
    while active.any():
        nids = cur[active]
        axis = nd_axis[nids]
        feat = nd_feat[nids]
        vals = np.empty(nids.shape[0])
        on_rows = axis == AXIS_ROWS
        vals[on_rows] = x1t[ii[active][on_rows], feat[on_rows]]
        vals[~on_rows] = x2t[jj[active][~on_rows], feat[~on_rows]]
        go_left = vals <= nd_thr[nids]
        cur[active] = np.where(go_left, nd_left[nids], nd_right[nids])
        active = nd_axis[cur] != LEAF
    return cur.reshape(t1, t2)


def leaf_grid_batch(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    """Batch assignment painted onto the full dyad grid in one pass."""
    ids, rbuf, roff, rlen, cbuf, coff, clen = assign_leaves(
        nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t)
    out = np.empty((x1t.shape[0], x2t.shape[0]), dtype=np.int64)
    for b in range(ids.shape[0]):
        rows = rbuf[roff[b]:roff[b] + rlen[b]]
        cols = cbuf[coff[b]:coff[b] + clen[b]]
        out[np.ix_(rows, cols)] = ids[b]
    return out
