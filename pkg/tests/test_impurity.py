import numpy as np
import pytest

from oxyforest.errors import UsageError
from oxyforest.impurity import (
    ProxyPair,
    build_proxies,
    delta_impurity,
    impurity,
    scan_axis_splits,
)

from oracles import block_stats, split_delta_oracle


def test_impurity_is_flattened_variance():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n1 = int(rng.integers(1, 9))
        n2 = int(rng.integers(1, 9))
        blk = (rng.random((n1, n2)) < 0.4).astype(np.float64)
        assert impurity(block_stats(blk)) == pytest.approx(
            float(blk.var()), abs=1e-12)


def test_impurity_pure_block_is_zero():
    assert impurity((6.0, 6.0, 6.0)) == 0.0
    assert impurity((6.0, 0.0, 0.0)) == 0.0


def test_impurity_validation():
    with pytest.raises(UsageError):
        impurity((0.0, 0.0, 0.0))
    with pytest.raises(UsageError):
        impurity((1.0, 1.0))


def test_proxies_aggregate_rows_and_cols():
    y = np.array([[1.0, 0.0, 1.0],
                  [0.0, 0.0, 1.0]])
    pair = build_proxies(y)
    assert np.array_equal(pair.p1, [[3.0, 2.0, 2.0], [3.0, 1.0, 1.0]])
    assert np.array_equal(pair.p2, [[2.0, 1.0, 1.0],
                                    [2.0, 0.0, 0.0],
                                    [2.0, 2.0, 2.0]])
    assert np.array_equal(pair.node_stats, [6.0, 3.0, 3.0])


def test_proxy_rows_and_cols_agree_on_node_stats():
    rng = np.random.default_rng(1)
    for _ in range(20):
        blk = (rng.random((int(rng.integers(1, 12)),
                           int(rng.integers(1, 12)))) < 0.5)
        pair = build_proxies(blk.astype(np.float64))
        assert np.array_equal(pair.node_stats, pair.p2.sum(axis=0))


def test_delta_impurity_matches_oracle_both_axes():
    rng = np.random.default_rng(2)
    for trial in range(60):
        n1 = int(rng.integers(2, 10))
        n2 = int(rng.integers(2, 10))
        blk = (rng.random((n1, n2)) < 0.5).astype(np.float64)
        axis = trial % 2
        k = n1 if axis == 0 else n2
        mask = rng.random(k) < 0.5
        if not mask.any() or mask.all():
            mask[0] = True
            mask[-1] = False
        if axis == 0:
            left, right = blk[mask, :], blk[~mask, :]
        else:
            left, right = blk[:, mask], blk[:, ~mask]
        n_norm = float(blk.size)
        got = delta_impurity(block_stats(blk), block_stats(left),
                             block_stats(right), n_norm)
        want = split_delta_oracle(blk, axis, mask, n_norm)
        assert got == pytest.approx(max(want, -1e-12), abs=1e-12)


def test_delta_impurity_exact_integers_on_binary_blocks():
    blk = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    stats = block_stats(blk)
    assert stats == (9.0, 3.0, 3.0)
    left = block_stats(blk[:1])
    right = block_stats(blk[1:])
    d = delta_impurity(stats, left, right, 9.0)
    # 9 * (1/3 - 1/9) = 2 for the node; children contribute 2/3 + 5/18 * 6
    assert d == pytest.approx((2.0 - (3.0 * 2.0 / 9.0) - (6.0 * 5.0 / 36.0))
                              / 9.0, abs=1e-15)


def test_delta_impurity_rejects_bad_partition():
    with pytest.raises(UsageError):
        delta_impurity((4.0, 2.0, 2.0), (2.0, 1.0, 1.0), (2.0, 2.0, 2.0), 4.0)
    with pytest.raises(UsageError):
        delta_impurity((4.0, 2.0, 2.0), (2.0, 1.0, 1.0), (2.0, 1.0, 1.0), 0.0)


def test_delta_impurity_pure_node_never_gains():
    stats = (8.0, 8.0, 8.0)
    d = delta_impurity(stats, (3.0, 3.0, 3.0), (5.0, 5.0, 5.0), 8.0)
    assert -1e-12 <= d <= 0.0


def test_scan_matches_per_threshold_delta():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n1 = int(rng.integers(3, 12))
        n2 = int(rng.integers(3, 12))
        blk = (rng.random((n1, n2)) < 0.5).astype(np.float64)
        pair = build_proxies(blk)
        fv = rng.random(n1)
        thresholds = np.sort(rng.random(7))
        n_norm = float(blk.size)
        rows = scan_axis_splits(pair.p1, fv, thresholds, n_norm)
        for thr, delta, n_left in rows:
            mask = fv <= thr
            assert n_left == int(mask.sum())
            if n_left == 0 or n_left == n1:
                assert delta == -np.inf
                continue
            want = split_delta_oracle(blk, 0, mask, n_norm)
            assert delta == pytest.approx(max(want, -1e-12), abs=1e-12)


def test_scan_rejects_descending_thresholds():
    pair = build_proxies(np.eye(3))
    with pytest.raises(UsageError):
        scan_axis_splits(pair.p1, np.arange(3.0), np.array([0.9, 0.1]), 9.0)


def test_scan_column_axis_uses_p2():
    blk = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 1.0]])
    pair = build_proxies(blk)
    fv = np.array([0.1, 0.5, 0.9])
    rows = scan_axis_splits(pair.p2, fv, np.array([0.3, 0.7]), blk.size)
    for thr, delta, _ in rows:
        want = split_delta_oracle(blk, 1, fv <= thr, blk.size)
        assert delta == pytest.approx(max(want, -1e-12), abs=1e-12)
