"""Variance impurity over interaction blocks, proxy statistics, and the
threshold scan used by the split search.

A node's statistics are the 3-vector [count, sum, sum of squares] of its
label block. The impurity is the variance of the flattened block; the gain
of a split normalizes the weighted impurity decrease by n_norm, which is
the full training dyad count by default (any positive constant leaves the
argmax unchanged) or the node's own dyad count when n_norm is not given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from ._kernels_numpy import DELTA_FLOOR
from .errors import UsageError

# children must reproduce the parent's stats to this absolute tolerance
_PARTITION_TOL = 1e-9


@dataclass(frozen=True)
class ProxyPair:
    """Per-row and per-column [count, sum, sumsq] aggregates of a Y block."""

    p1: np.ndarray
    p2: np.ndarray

    @property
    def node_stats(self) -> np.ndarray:
        return self.p1.sum(axis=0)


def _stats3(s, name: str) -> np.ndarray:
    out = np.asarray(s, dtype=np.float64).reshape(-1)
    if out.shape[0] != 3:
        raise UsageError(f"{name} must have exactly 3 entries [count, sum, sumsq]")
    return out


def impurity(stats) -> float:
    """Variance of the flattened block from its [count, sum, sumsq] vector."""
    s = _stats3(stats, "stats")
    if s[0] < 1:
        raise UsageError(f"impurity needs a positive count, got {s[0]}")
    m = s[1] / s[0]
    val = s[2] / s[0] - m * m
    return max(val, 0.0)


def build_proxies(y_node) -> ProxyPair:
    y = np.ascontiguousarray(y_node, dtype=np.float64)
    if y.ndim != 2 or y.size == 0:
        raise UsageError("build_proxies needs a nonempty 2-d block")
    kern = backend.kernels()
    p1, p2 = kern.proxy_stats(
        y,
        np.arange(y.shape[0], dtype=np.int64),
        np.arange(y.shape[1], dtype=np.int64),
    )
    return ProxyPair(p1, p2)


def delta_impurity(node, a, b, n_norm: float) -> float:
    """Impurity decrease of the partition of `node` into `a` and `b`.

    Clamped below at -1e-12 so rounding noise on a pure node can never
    look like a positive gain.
    """
    sn = _stats3(node, "node")
    sa = _stats3(a, "a")
    sb = _stats3(b, "b")
    if np.abs(sa + sb - sn).max() > _PARTITION_TOL:
        raise UsageError("children stats do not partition the node stats")
    if n_norm <= 0:
        raise UsageError(f"n_norm must be positive, got {n_norm}")
    gain = (
        sn[0] * impurity(sn)
        - sa[0] * impurity(sa)
        - sb[0] * impurity(sb)
    ) / float(n_norm)
    return max(gain, DELTA_FLOOR)


def scan_axis_splits(proxy: np.ndarray, feature_values, thresholds,
                     n_norm: float | None = None):
    """Gain of every threshold on one axis via a prefix scan.

    `proxy` is the axis' side of a ProxyPair (one row per instance).
    Thresholds must be ascending. Returns a list of (threshold, gain,
    n_left); a threshold leaving either side empty reports -inf gain.
    """
    proxy = np.ascontiguousarray(proxy, dtype=np.float64)
    fv = np.ascontiguousarray(feature_values, dtype=np.float64)
    th = np.ascontiguousarray(thresholds, dtype=np.float64)
    if proxy.ndim != 2 or proxy.shape[1] != 3:
        raise UsageError("proxy must be an (n, 3) array")
    if fv.shape[0] != proxy.shape[0]:
        raise UsageError(
            f"feature_values length {fv.shape[0]} does not match "
            f"proxy row count {proxy.shape[0]}")
    if th.shape[0] > 1 and (np.diff(th) < 0).any():
        raise UsageError("thresholds must be ascending")
    kern = backend.kernels()
    nn = 0.0 if n_norm is None else float(n_norm)
    deltas, n_left = kern.scan_thresholds(proxy, fv, th, nn)
    return [(float(th[i]), float(deltas[i]), int(n_left[i]))
            for i in range(th.shape[0])]
