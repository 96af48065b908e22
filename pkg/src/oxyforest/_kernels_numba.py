"""Numba-compiled twins of the `_kernels_numpy` kernels.

Same algorithms, same draw order, same arithmetic expression order; for
binary interaction matrices every split statistic is an exact integer in
float64, so these produce trees bit-identical to the fallback backend.
Kernels release the GIL so forest fitting can thread.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1
AXIS_ROWS = 0
AXIS_COLS = 1

DELTA_FLOOR = -1e-12
_UNIT = 2.0 ** -53

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_B = np.uint64(0xBF58476D1CE4E5B9)
_MIX_C = np.uint64(0x94D049BB133111EB)
_U11 = np.uint64(11)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)


@njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _U30)) * _MIX_B
    z = (z ^ (z >> _U27)) * _MIX_C
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def _node_seed(tree_seed, node_id):
    return _mix64(np.uint64(tree_seed) + _GAMMA * np.uint64(node_id + 1))


@njit(cache=True, nogil=True)
def _impurity(s0, s1, s2):
    m = s1 / s0
    val = s2 / s0 - m * m
    if val < 0.0:
        val = 0.0
    return val


@njit(cache=True, nogil=True)
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


@njit(cache=True, nogil=True)
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


@njit(cache=True, nogil=True)
def jacobi_eigh(a, tol_factor, max_sweeps):
    n = a.shape[0]
    w = a.copy()
    v = np.eye(n)
    if n < 2:
        return np.diag(w).copy(), v, True, 0
    norm0 = 0.0
    for i in range(n):
        for j in range(n):
            norm0 += a[i, j] * a[i, j]
    threshold = tol_factor * np.sqrt(norm0)
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += w[i, j] * w[i, j]
        if np.sqrt(off) <= threshold:
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
                for k in range(n):
                    akp = w[k, p]
                    akq = w[k, q]
                    w[k, p] = c * akp - s * akq
                    w[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = w[p, k]
                    aqk = w[q, k]
                    w[p, k] = c * apk - s * aqk
                    w[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    off = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                off += w[i, j] * w[i, j]
    converged = np.sqrt(off) <= threshold
    return np.diag(w).copy(), v, converged, sweeps


@njit(cache=True, nogil=True)
def proxy_stats(y, row_idx, col_idx):
    k1 = row_idx.shape[0]
    k2 = col_idx.shape[0]
    p1 = np.empty((k1, 3))
    p2 = np.zeros((k2, 3))
    p2[:, 0] = k1
    for a in range(k1):
        gi = row_idx[a]
        r1 = 0.0
        r2 = 0.0
        for b in range(k2):
            z = y[gi, col_idx[b]]
            r1 += z
            r2 += z * z
            p2[b, 1] += z
            p2[b, 2] += z * z
        p1[a, 0] = k2
        p1[a, 1] = r1
        p1[a, 2] = r2
    return p1, p2


@njit(cache=True, nogil=True)
def scan_thresholds(proxy, values, thresholds, n_norm):
    k = values.shape[0]
    order = np.argsort(values, kind="mergesort")
    sv = np.empty(k)
    prefix = np.zeros((k + 1, 3))
    for r in range(k):
        oi = order[r]
        sv[r] = values[oi]
        prefix[r + 1, 0] = prefix[r, 0] + proxy[oi, 0]
        prefix[r + 1, 1] = prefix[r, 1] + proxy[oi, 1]
        prefix[r + 1, 2] = prefix[r, 2] + proxy[oi, 2]
    t0 = prefix[k, 0]
    t1 = prefix[k, 1]
    t2 = prefix[k, 2]
    nn = n_norm if n_norm > 0 else t0
    n_thr = thresholds.shape[0]
    deltas = np.empty(n_thr)
    n_left = np.empty(n_thr, np.int64)
    for i in range(n_thr):
        p = np.searchsorted(sv, thresholds[i], side="right")
        n_left[i] = p
        if p == 0 or p == k:
            deltas[i] = -np.inf
            continue
        deltas[i] = _delta(t0, t1, t2,
                           prefix[p, 0], prefix[p, 1], prefix[p, 2], nn)
    return deltas, n_left


@njit(cache=True, nogil=True)
def _grow_i64(buf, top, need):
    if top + need > buf.shape[0]:
        cap = buf.shape[0] * 2
        while cap < top + need:
            cap *= 2
        new = np.empty(cap, np.int64)
        new[:top] = buf[:top]
        return new
    return buf


@njit(cache=True, nogil=True)
def _grow_f64(buf, top, need):
    if top + need > buf.shape[0]:
        cap = buf.shape[0] * 2
        while cap < top + need:
            cap *= 2
        new = np.empty(cap, np.float64)
        new[:top] = buf[:top]
        return new
    return buf


@njit(cache=True, nogil=True)
def _left_stats(axis, vals, seg, thr, p1, p2):
    """Stats of the would-be left child from the node's axis marginals;
    membership is by value (v <= thr)."""
    n_l = 0
    l1 = 0.0
    l2 = 0.0
    if axis == AXIS_ROWS:
        for a in range(seg):
            if vals[a] <= thr:
                n_l += 1
                l1 += p1[a, 1]
                l2 += p1[a, 2]
    else:
        for b in range(seg):
            if vals[b] <= thr:
                n_l += 1
                l1 += p2[b, 1]
                l2 += p2[b, 2]
    return l1, l2, n_l


@njit(cache=True, nogil=True)
def _side_stats_naive(axis, vals, seg, thr, y,
                      rows_buf, roff, rlen, cols_buf, coff, clen):
    """Both children's stats measured by direct scans of the output
    submatrix, one full pass per candidate; membership is by value."""
    n_l = 0
    l1 = 0.0
    l2 = 0.0
    r1 = 0.0
    r2 = 0.0
    if axis == AXIS_ROWS:
        for a in range(seg):
            gi = rows_buf[roff + a]
            if vals[a] <= thr:
                n_l += 1
                for b in range(clen):
                    z = y[gi, cols_buf[coff + b]]
                    l1 += z
                    l2 += z * z
            else:
                for b in range(clen):
                    z = y[gi, cols_buf[coff + b]]
                    r1 += z
                    r2 += z * z
    else:
        for b in range(seg):
            gj = cols_buf[coff + b]
            if vals[b] <= thr:
                n_l += 1
                for a in range(rlen):
                    z = y[rows_buf[roff + a], gj]
                    l1 += z
                    l2 += z * z
            else:
                for a in range(rlen):
                    z = y[rows_buf[roff + a], gj]
                    r1 += z
                    r2 += z * z
    return l1, l2, r1, r2, n_l


@njit(cache=True, nogil=True)
def _better(d, axis, f, thr, best_d, best_axis, best_feat, best_thr):
    if d > best_d:
        return True
    if d == best_d:
        if axis < best_axis:
            return True
        if axis == best_axis:
            if f < best_feat:
                return True
            if f == best_feat and thr < best_thr:
                return True
    return False


@njit(cache=True, nogil=True)
def grow_tree(x1, x2, y, row_idx0, col_idx0, min_rows, min_cols,
              mf_rows, mf_cols, n_norm_in, tree_seed,
              naive_eval, exhaustive):
    n1 = row_idx0.shape[0]
    n2 = col_idx0.shape[0]
    m1 = x1.shape[1]
    m2 = x2.shape[1]

    # index segments: bump-allocated, copied out on split, never mutated
    rows_buf = np.empty(4 * n1 + 16, np.int64)
    rows_buf[:n1] = row_idx0
    rows_top = n1
    cols_buf = np.empty(4 * n2 + 16, np.int64)
    cols_buf[:n2] = col_idx0
    cols_top = n2

    cap = 256
    nd_axis = np.empty(cap, np.int64)
    nd_feat = np.empty(cap, np.int64)
    nd_thr = np.empty(cap, np.float64)
    nd_left = np.empty(cap, np.int64)
    nd_right = np.empty(cap, np.int64)
    nd_leaf = np.empty(cap, np.int64)
    nd_axis[0] = LEAF
    nd_feat[0] = -1
    nd_thr[0] = 0.0
    nd_left[0] = -1
    nd_right[0] = -1
    nd_leaf[0] = -1
    n_nodes = 1

    lf_roff = np.empty(64, np.int64)
    lf_rlen = np.empty(64, np.int64)
    lf_coff = np.empty(64, np.int64)
    lf_clen = np.empty(64, np.int64)
    n_leaves = 0

    st_node = np.empty(64, np.int64)
    st_roff = np.empty(64, np.int64)
    st_rlen = np.empty(64, np.int64)
    st_coff = np.empty(64, np.int64)
    st_clen = np.empty(64, np.int64)
    st_node[0] = 0
    st_roff[0] = 0
    st_rlen[0] = n1
    st_coff[0] = 0
    st_clen[0] = n2
    sp = 1

    p1 = np.empty((n1, 3))
    p2 = np.empty((n2, 3))
    vals = np.empty(n1 if n1 > n2 else n2)
    pool = np.empty(m1 if m1 > m2 else m2, np.int64)

    while sp > 0:
        sp -= 1
        nid = st_node[sp]
        roff = st_roff[sp]
        rlen = st_rlen[sp]
        coff = st_coff[sp]
        clen = st_clen[sp]

        s1 = 0.0
        s2 = 0.0
        if naive_eval:
            for a in range(rlen):
                gi = rows_buf[roff + a]
                for b in range(clen):
                    z = y[gi, cols_buf[coff + b]]
                    s1 += z
                    s2 += z * z
        else:
            for b in range(clen):
                p2[b, 0] = rlen
                p2[b, 1] = 0.0
                p2[b, 2] = 0.0
            for a in range(rlen):
                gi = rows_buf[roff + a]
                r1 = 0.0
                r2 = 0.0
                for b in range(clen):
                    z = y[gi, cols_buf[coff + b]]
                    r1 += z
                    r2 += z * z
                    p2[b, 1] += z
                    p2[b, 2] += z * z
                p1[a, 0] = clen
                p1[a, 1] = r1
                p1[a, 2] = r2
                s1 += r1
                s2 += r2
        s0 = float(rlen * clen)
        pure = s0 * s2 == s1 * s1
        can_row = rlen >= 2 * min_rows
        can_col = clen >= 2 * min_cols

        best_d = -np.inf
        best_axis = -1
        best_feat = -1
        best_thr = 0.0

        if (not pure) and (can_row or can_col):
            n_norm = n_norm_in if n_norm_in > 0 else s0
            state = _node_seed(tree_seed, nid)
            for axis in range(2):
                if axis == AXIS_ROWS:
                    seg = rlen
                    m = m1
                    k = mf_rows if mf_rows < m1 else m1
                    min_here = min_rows
                else:
                    seg = clen
                    m = m2
                    k = mf_cols if mf_cols < m2 else m2
                    min_here = min_cols
                for t in range(m):
                    pool[t] = t
                for t in range(k):
                    state = state + _GAMMA
                    rz = _mix64(state)
                    j = t + np.int64(rz % np.uint64(m - t))
                    tmp = pool[t]
                    pool[t] = pool[j]
                    pool[j] = tmp
                for t in range(k):
                    f = pool[t]
                    if axis == AXIS_ROWS:
                        lo = x1[rows_buf[roff], f]
                        hi = lo
                        vals[0] = lo
                        for a in range(1, seg):
                            vv = x1[rows_buf[roff + a], f]
                            vals[a] = vv
                            if vv < lo:
                                lo = vv
                            if vv > hi:
                                hi = vv
                    else:
                        lo = x2[cols_buf[coff], f]
                        hi = lo
                        vals[0] = lo
                        for b in range(1, seg):
                            vv = x2[cols_buf[coff + b], f]
                            vals[b] = vv
                            if vv < lo:
                                lo = vv
                            if vv > hi:
                                hi = vv
                    if hi <= lo:
                        continue
                    if exhaustive:
                        order = np.argsort(vals[:seg], kind="mergesort")
                        for ppos in range(seg - 1):
                            vhere = vals[order[ppos]]
                            vnext = vals[order[ppos + 1]]
                            if vhere == vnext:
                                continue
                            thr = 0.5 * (vhere + vnext)
                            other = clen if axis == AXIS_ROWS else rlen
                            if naive_eval:
                                l1, l2, r1, r2, n_l = _side_stats_naive(
                                    axis, vals, seg, thr, y,
                                    rows_buf, roff, rlen,
                                    cols_buf, coff, clen)
                                if n_l < min_here or seg - n_l < min_here:
                                    continue
                                l0 = float(n_l) * float(other)
                                d = _delta_sides(s0, s1, s2, l0, l1, l2,
                                                 s0 - l0, r1, r2, n_norm)
                            else:
                                l1, l2, n_l = _left_stats(
                                    axis, vals, seg, thr, p1, p2)
                                if n_l < min_here or seg - n_l < min_here:
                                    continue
                                l0 = float(n_l) * float(other)
                                d = _delta(s0, s1, s2, l0, l1, l2, n_norm)
                            if _better(d, axis, f, thr,
                                       best_d, best_axis, best_feat, best_thr):
                                best_d = d
                                best_axis = axis
                                best_feat = f
                                best_thr = thr
                    else:
                        state = state + _GAMMA
                        rz = _mix64(state)
                        u = np.float64(rz >> _U11) * _UNIT
                        thr = lo + u * (hi - lo)
                        other = clen if axis == AXIS_ROWS else rlen
                        if naive_eval:
                            l1, l2, r1, r2, n_l = _side_stats_naive(
                                axis, vals, seg, thr, y,
                                rows_buf, roff, rlen, cols_buf, coff, clen)
                            if n_l < min_here or seg - n_l < min_here:
                                continue
                            l0 = float(n_l) * float(other)
                            d = _delta_sides(s0, s1, s2, l0, l1, l2,
                                             s0 - l0, r1, r2, n_norm)
                        else:
                            l1, l2, n_l = _left_stats(
                                axis, vals, seg, thr, p1, p2)
                            if n_l < min_here or seg - n_l < min_here:
                                continue
                            l0 = float(n_l) * float(other)
                            d = _delta(s0, s1, s2, l0, l1, l2, n_norm)
                        if _better(d, axis, f, thr,
                                   best_d, best_axis, best_feat, best_thr):
                            best_d = d
                            best_axis = axis
                            best_feat = f
                            best_thr = thr

        if best_axis < 0:
            if n_leaves == lf_roff.shape[0]:
                lf_roff = _grow_i64(lf_roff, n_leaves, 1)
                lf_rlen = _grow_i64(lf_rlen, n_leaves, 1)
                lf_coff = _grow_i64(lf_coff, n_leaves, 1)
                lf_clen = _grow_i64(lf_clen, n_leaves, 1)
            lf_roff[n_leaves] = roff
            lf_rlen[n_leaves] = rlen
            lf_coff[n_leaves] = coff
            lf_clen[n_leaves] = clen
            nd_leaf[nid] = n_leaves
            n_leaves += 1
            continue

        # stable copy-out partition of the chosen axis
        if best_axis == AXIS_ROWS:
            seg = rlen
            n_l = 0
            for a in range(seg):
                if x1[rows_buf[roff + a], best_feat] <= best_thr:
                    n_l += 1
            rows_buf = _grow_i64(rows_buf, rows_top, seg)
            li = rows_top
            ri = rows_top + n_l
            for a in range(seg):
                gi = rows_buf[roff + a]
                if x1[gi, best_feat] <= best_thr:
                    rows_buf[li] = gi
                    li += 1
                else:
                    rows_buf[ri] = gi
                    ri += 1
            l_roff, l_rlen, l_coff, l_clen = rows_top, n_l, coff, clen
            r_roff, r_rlen, r_coff, r_clen = (rows_top + n_l, seg - n_l,
                                              coff, clen)
            rows_top += seg
        else:
            seg = clen
            n_l = 0
            for b in range(seg):
                if x2[cols_buf[coff + b], best_feat] <= best_thr:
                    n_l += 1
            cols_buf = _grow_i64(cols_buf, cols_top, seg)
            li = cols_top
            ri = cols_top + n_l
            for b in range(seg):
                gj = cols_buf[coff + b]
                if x2[gj, best_feat] <= best_thr:
                    cols_buf[li] = gj
                    li += 1
                else:
                    cols_buf[ri] = gj
                    ri += 1
            l_roff, l_rlen, l_coff, l_clen = roff, rlen, cols_top, n_l
            r_roff, r_rlen, r_coff, r_clen = (roff, rlen,
                                              cols_top + n_l, seg - n_l)
            cols_top += seg

        if n_nodes + 2 > nd_axis.shape[0]:
            nd_axis = _grow_i64(nd_axis, n_nodes, 2)
            nd_feat = _grow_i64(nd_feat, n_nodes, 2)
            nd_thr = _grow_f64(nd_thr, n_nodes, 2)
            nd_left = _grow_i64(nd_left, n_nodes, 2)
            nd_right = _grow_i64(nd_right, n_nodes, 2)
            nd_leaf = _grow_i64(nd_leaf, n_nodes, 2)
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        nd_axis[left_id] = LEAF
        nd_feat[left_id] = -1
        nd_thr[left_id] = 0.0
        nd_left[left_id] = -1
        nd_right[left_id] = -1
        nd_leaf[left_id] = -1
        nd_axis[right_id] = LEAF
        nd_feat[right_id] = -1
        nd_thr[right_id] = 0.0
        nd_left[right_id] = -1
        nd_right[right_id] = -1
        nd_leaf[right_id] = -1
        nd_axis[nid] = best_axis
        nd_feat[nid] = best_feat
        nd_thr[nid] = best_thr
        nd_left[nid] = left_id
        nd_right[nid] = right_id

        if sp + 2 > st_node.shape[0]:
            st_node = _grow_i64(st_node, sp, 2)
            st_roff = _grow_i64(st_roff, sp, 2)
            st_rlen = _grow_i64(st_rlen, sp, 2)
            st_coff = _grow_i64(st_coff, sp, 2)
            st_clen = _grow_i64(st_clen, sp, 2)
        st_node[sp] = right_id
        st_roff[sp] = r_roff
        st_rlen[sp] = r_rlen
        st_coff[sp] = r_coff
        st_clen[sp] = r_clen
        sp += 1
        st_node[sp] = left_id
        st_roff[sp] = l_roff
        st_rlen[sp] = l_rlen
        st_coff[sp] = l_coff
        st_clen[sp] = l_clen
        sp += 1

    return (
        nd_axis[:n_nodes].copy(),
        nd_feat[:n_nodes].copy(),
        nd_thr[:n_nodes].copy(),
        nd_left[:n_nodes].copy(),
        nd_right[:n_nodes].copy(),
        nd_leaf[:n_nodes].copy(),
        rows_buf[:rows_top].copy(),
        lf_roff[:n_leaves].copy(),
        lf_rlen[:n_leaves].copy(),
        cols_buf[:cols_top].copy(),
        lf_coff[:n_leaves].copy(),
        lf_clen[:n_leaves].copy(),
    )


@njit(cache=True, nogil=True)
def assign_leaves(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    t1 = x1t.shape[0]
    t2 = x2t.shape[0]
    rows_buf = np.empty(4 * t1 + 16, np.int64)
    cols_buf = np.empty(4 * t2 + 16, np.int64)
    for i in range(t1):
        rows_buf[i] = i
    for j in range(t2):
        cols_buf[j] = j
    rows_top = t1
    cols_top = t2

    st_node = np.empty(64, np.int64)
    st_roff = np.empty(64, np.int64)
    st_rlen = np.empty(64, np.int64)
    st_coff = np.empty(64, np.int64)
    st_clen = np.empty(64, np.int64)
    st_node[0] = 0
    st_roff[0] = 0
    st_rlen[0] = t1
    st_coff[0] = 0
    st_clen[0] = t2
    sp = 1

    blk_node = np.empty(64, np.int64)
    blk_roff = np.empty(64, np.int64)
    blk_rlen = np.empty(64, np.int64)
    blk_coff = np.empty(64, np.int64)
    blk_clen = np.empty(64, np.int64)
    n_blocks = 0

    while sp > 0:
        sp -= 1
        nid = st_node[sp]
        roff = st_roff[sp]
        rlen = st_rlen[sp]
        coff = st_coff[sp]
        clen = st_clen[sp]
        axis = nd_axis[nid]
        if axis == LEAF:
            if n_blocks == blk_node.shape[0]:
                blk_node = _grow_i64(blk_node, n_blocks, 1)
                blk_roff = _grow_i64(blk_roff, n_blocks, 1)
                blk_rlen = _grow_i64(blk_rlen, n_blocks, 1)
                blk_coff = _grow_i64(blk_coff, n_blocks, 1)
                blk_clen = _grow_i64(blk_clen, n_blocks, 1)
            blk_node[n_blocks] = nid
            blk_roff[n_blocks] = roff
            blk_rlen[n_blocks] = rlen
            blk_coff[n_blocks] = coff
            blk_clen[n_blocks] = clen
            n_blocks += 1
            continue
        f = nd_feat[nid]
        thr = nd_thr[nid]
        if axis == AXIS_ROWS:
            seg = rlen
            rows_buf = _grow_i64(rows_buf, rows_top, seg)
            li = rows_top
            ri = rows_top + seg
            for a in range(seg):
                gi = rows_buf[roff + a]
                left = x1t[gi, f] <= thr
                rows_buf[li if left else ri - 1] = gi
                li += 1 if left else 0
                ri -= 0 if left else 1
            lo = li
            hi = rows_top + seg - 1
            while lo < hi:
                tmp = rows_buf[lo]
                rows_buf[lo] = rows_buf[hi]
                rows_buf[hi] = tmp
                lo += 1
                hi -= 1
            n_l = li - rows_top
            l_roff, l_rlen, l_coff, l_clen = rows_top, n_l, coff, clen
            r_roff, r_rlen, r_coff, r_clen = (rows_top + n_l, seg - n_l,
                                              coff, clen)
            rows_top += seg
        else:
            seg = clen
            cols_buf = _grow_i64(cols_buf, cols_top, seg)
            li = cols_top
            ri = cols_top + seg
            for b in range(seg):
                gj = cols_buf[coff + b]
                left = x2t[gj, f] <= thr
                cols_buf[li if left else ri - 1] = gj
                li += 1 if left else 0
                ri -= 0 if left else 1
            lo = li
            hi = cols_top + seg - 1
            while lo < hi:
                tmp = cols_buf[lo]
                cols_buf[lo] = cols_buf[hi]
                cols_buf[hi] = tmp
                lo += 1
                hi -= 1
            n_l = li - cols_top
            l_roff, l_rlen, l_coff, l_clen = roff, rlen, cols_top, n_l
            r_roff, r_rlen, r_coff, r_clen = (roff, rlen,
                                              cols_top + n_l, seg - n_l)
            cols_top += seg

        if sp + 2 > st_node.shape[0]:
            st_node = _grow_i64(st_node, sp, 2)
            st_roff = _grow_i64(st_roff, sp, 2)
            st_rlen = _grow_i64(st_rlen, sp, 2)
            st_coff = _grow_i64(st_coff, sp, 2)
            st_clen = _grow_i64(st_clen, sp, 2)
        if r_rlen > 0 and r_clen > 0:
            st_node[sp] = nd_right[nid]
            st_roff[sp] = r_roff
            st_rlen[sp] = r_rlen
            st_coff[sp] = r_coff
            st_clen[sp] = r_clen
            sp += 1
        if l_rlen > 0 and l_clen > 0:
            st_node[sp] = nd_left[nid]
            st_roff[sp] = l_roff
            st_rlen[sp] = l_rlen
            st_coff[sp] = l_coff
            st_clen[sp] = l_clen
            sp += 1

    return (
        blk_node[:n_blocks].copy(),
        rows_buf[:rows_top].copy(),
        blk_roff[:n_blocks].copy(),
        blk_rlen[:n_blocks].copy(),
        cols_buf[:cols_top].copy(),
        blk_coff[:n_blocks].copy(),
        blk_clen[:n_blocks].copy(),
    )


@njit(cache=True, nogil=True)
def traverse_grid(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    t1 = x1t.shape[0]
    t2 = x2t.shape[0]
    out = np.empty((t1, t2), np.int64)
    for i in range(t1):
        for j in range(t2):
            nid = 0
            ax = nd_axis[nid]
            while ax != LEAF:
                f = nd_feat[nid]
                v = x1t[i, f] if ax == AXIS_ROWS else x2t[j, f]
                nid = nd_left[nid] if v <= nd_thr[nid] else nd_right[nid]
                ax = nd_axis[nid]
            out[i, j] = nid
    return out


@njit(cache=True, nogil=True)
def leaf_grid_batch(nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t):
    """Batch assignment painted onto the full dyad grid in one pass."""
    ids, rbuf, roff, rlen, cbuf, coff, clen = assign_leaves(
        nd_axis, nd_feat, nd_thr, nd_left, nd_right, x1t, x2t)
    t1 = x1t.shape[0]
    t2 = x2t.shape[0]
    n_blocks = ids.shape[0]
    out = np.empty((t1, t2), np.int64)

    # Paint row-major: group each test row's blocks first, then sweep rows
    # in order so writes stay within one output row at a time.
    row_ptr = np.zeros(t1 + 1, np.int64)
    for b in range(n_blocks):
        for a in range(rlen[b]):
            row_ptr[rbuf[roff[b] + a] + 1] += 1
    for i in range(t1):
        row_ptr[i + 1] += row_ptr[i]
    ent = np.empty(row_ptr[t1], np.int64)
    pos = row_ptr[:t1].copy()
    for b in range(n_blocks):
        for a in range(rlen[b]):
            r = rbuf[roff[b] + a]
            ent[pos[r]] = b
            pos[r] += 1
    for i in range(t1):
        for s in range(row_ptr[i], row_ptr[i + 1]):
            b = ent[s]
            nid = ids[b]
            c0 = coff[b]
            for j in range(clen[b]):
                out[i, cbuf[c0 + j]] = nid
    return out
