"""Biclustering model trees with randomized split search.

A tree's internal node cuts either the row domain or the column domain on
one feature threshold (value <= threshold goes left), so the leaves tile
the interaction matrix into blocks. Split candidates are scored through
the per-axis proxy statistics; each node samples max_features features
per axis and draws one uniform threshold per non-constant feature
(exhaustive midpoint enumeration exists behind a flag for oracle tests,
and naive_eval re-aggregates Y per candidate for the benchmark).

All randomness at a node comes from a SplitMix64 stream seeded by
derive_seed(tree_seed, node_id), which is what makes the compiled and
fallback builders interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from ._kernels_numpy import (
    AXIS_COLS,
    AXIS_ROWS,
    LEAF,
    GrowTrace,
    _node_seed,
    _sm_draw,
    sample_features,
)
from .errors import DataError, UsageError
from .leafmodels import (
    KernelConfig,
    MeanLeaf,
    RlsKronLeaf,
    kernel_matrix,
    leaf_from_doc,
    mean_fit,
    rls_kron_fit,
)
from .rng import MASK64

_UNIT = 2.0 ** -53

_LEAF_MODELS = ("rls_kron", "mean")
_NORM_MODES = ("global", "node")

FORMAT_VERSION = "oxyforest-1"


@dataclass(frozen=True)
class TreeParams:
    """Hyperparameters shared by every node of a tree.

    max_features accepts a count, "all", or None for ceil(sqrt(m)).
    norm_mode picks the gain normalizer: the full training dyad count
    ("global", the default) or the node's own dyad count ("node").
    """

    min_rows: int = 5
    min_cols: int = 5
    max_features_rows: int | str | None = None
    max_features_cols: int | str | None = None
    leaf_model: str = "rls_kron"
    alpha: float = 1.0
    kernel1: KernelConfig | None = None
    kernel2: KernelConfig | None = None
    norm_mode: str = "global"
    exhaustive: bool = False
    naive_eval: bool = False

    def __post_init__(self):
        if self.min_rows < 1 or self.min_cols < 1:
            raise UsageError(
                f"minimum leaf dims must be >= 1, got "
                f"({self.min_rows}, {self.min_cols})")
        if self.leaf_model not in _LEAF_MODELS:
            raise UsageError(
                f"unknown leaf model {self.leaf_model!r}; "
                f"choose one of {_LEAF_MODELS}")
        if self.norm_mode not in _NORM_MODES:
            raise UsageError(
                f"unknown norm_mode {self.norm_mode!r}; "
                f"choose one of {_NORM_MODES}")
        for name in ("max_features_rows", "max_features_cols"):
            v = getattr(self, name)
            if v is None or v == "all":
                continue
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise UsageError(f"{name} must be a positive count or 'all'")

    def to_doc(self) -> dict:
        return {
            "min_rows": self.min_rows,
            "min_cols": self.min_cols,
            "max_features_rows": self.max_features_rows,
            "max_features_cols": self.max_features_cols,
            "leaf_model": self.leaf_model,
            "alpha": self.alpha,
            "kernel1": self.kernel1.to_doc() if self.kernel1 else None,
            "kernel2": self.kernel2.to_doc() if self.kernel2 else None,
            "norm_mode": self.norm_mode,
            "exhaustive": self.exhaustive,
            "naive_eval": self.naive_eval,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TreeParams":
        doc = dict(doc)
        for key in ("kernel1", "kernel2"):
            doc[key] = KernelConfig.from_doc(doc[key]) if doc[key] else None
        return cls(**doc)


def resolve_max_features(setting, m: int) -> int:
    if setting is None:
        return max(1, math.ceil(math.sqrt(m)))
    if setting == "all":
        return m
    return min(int(setting), m)


def resolve_kernel(cfg: KernelConfig | None, m: int,
                   similarity_features: bool) -> KernelConfig:
    """Default kernel: precomputed for similarity features, else rbf with
    gamma = 1/m."""
    if cfg is not None:
        return cfg
    if similarity_features:
        return KernelConfig(mode="precomputed")
    return KernelConfig(mode="rbf", gamma=1.0 / m)


def resolve_params(params: TreeParams, m1: int, m2: int,
                   similarity_features: bool = False) -> TreeParams:
    """Fill in the data-dependent defaults so the tree is self-describing."""
    return replace(
        params,
        max_features_rows=resolve_max_features(params.max_features_rows, m1),
        max_features_cols=resolve_max_features(params.max_features_cols, m2),
        kernel1=resolve_kernel(params.kernel1, m1, similarity_features),
        kernel2=resolve_kernel(params.kernel2, m2, similarity_features),
    )


@dataclass
class OxyTree:
    """Immutable after build; node arrays are parallel, axis == -1 marks
    leaves and nd_leaf maps a leaf node id to its model's ordinal."""

    nd_axis: np.ndarray
    nd_feat: np.ndarray
    nd_thr: np.ndarray
    nd_left: np.ndarray
    nd_right: np.ndarray
    nd_leaf: np.ndarray
    leaf_models: list
    leaf_rows: list | None
    leaf_cols: list | None
    params: TreeParams
    seed: int
    m1: int
    m2: int
    x1_train: np.ndarray | None = None
    x2_train: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.nd_axis.shape[0]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_models)

    def _check_widths(self, x1_test: np.ndarray, x2_test: np.ndarray):
        if x1_test.shape[1] != self.m1 or x2_test.shape[1] != self.m2:
            raise UsageError(
                f"test feature widths ({x1_test.shape[1]}, "
                f"{x2_test.shape[1]}) do not match training widths "
                f"({self.m1}, {self.m2})")

    def assign_leaves_batch(self, x1_test, x2_test):
        """Partition the test grid down the tree in one pass.

        Returns a list of (leaf node id, row indices, col indices); the
        blocks tile the test grid exactly once.
        """
        x1t = np.ascontiguousarray(x1_test, dtype=np.float64)
        x2t = np.ascontiguousarray(x2_test, dtype=np.float64)
        self._check_widths(x1t, x2t)
        kern = backend.kernels()
        ids, rbuf, roff, rlen, cbuf, coff, clen = kern.assign_leaves(
            self.nd_axis, self.nd_feat, self.nd_thr,
            self.nd_left, self.nd_right, x1t, x2t)
        return [
            (int(ids[i]),
             rbuf[roff[i]:roff[i] + rlen[i]],
             cbuf[coff[i]:coff[i] + clen[i]])
            for i in range(ids.shape[0])
        ]

    def traverse_dyad(self, x1_row, x2_row) -> int:
        """Root-to-leaf walk for one dyad; the per-pair reference path."""
        x1_row = np.asarray(x1_row, dtype=np.float64).reshape(-1)
        x2_row = np.asarray(x2_row, dtype=np.float64).reshape(-1)
        if x1_row.shape[0] != self.m1 or x2_row.shape[0] != self.m2:
            raise UsageError(
                f"dyad feature widths ({x1_row.shape[0]}, "
                f"{x2_row.shape[0]}) do not match training widths "
                f"({self.m1}, {self.m2})")
        nid = 0
        while self.nd_axis[nid] != LEAF:
            if self.nd_axis[nid] == AXIS_ROWS:
                v = x1_row[self.nd_feat[nid]]
            else:
                v = x2_row[self.nd_feat[nid]]
            nid = self.nd_left[nid] if v <= self.nd_thr[nid] \
                else self.nd_right[nid]
        return int(nid)

    def leaf_grid(self, x1_test, x2_test, per_dyad: bool = False):
        """Leaf node id per test dyad, batched or walked per dyad."""
        x1t = np.ascontiguousarray(x1_test, dtype=np.float64)
        x2t = np.ascontiguousarray(x2_test, dtype=np.float64)
        self._check_widths(x1t, x2t)
        kern = backend.kernels()
        if per_dyad:
            return kern.traverse_grid(
                self.nd_axis, self.nd_feat, self.nd_thr,
                self.nd_left, self.nd_right, x1t, x2t)
        return kern.leaf_grid_batch(
            self.nd_axis, self.nd_feat, self.nd_thr,
            self.nd_left, self.nd_right, x1t, x2t)

    def predict(self, x1_test, x2_test) -> np.ndarray:
        x1t = np.ascontiguousarray(x1_test, dtype=np.float64)
        x2t = np.ascontiguousarray(x2_test, dtype=np.float64)
        self._check_widths(x1t, x2t)
        out = np.empty((x1t.shape[0], x2t.shape[0]))
        for nid, rows, cols in self.assign_leaves_batch(x1t, x2t):
            model = self.leaf_models[self.nd_leaf[nid]]
            if isinstance(model, MeanLeaf):
                block = model.predict(rows.shape[0], cols.shape[0])
            else:
                phi1 = self._test_kernel(model.kernel1, x1t[rows],
                                         self.x1_train, model.rows)
                phi2 = self._test_kernel(model.kernel2, x2t[cols],
                                         self.x2_train, model.cols)
                block = model.predict(phi1, phi2)
            out[np.ix_(rows, cols)] = block
        return out

    @staticmethod
    def _test_kernel(cfg: KernelConfig, a: np.ndarray,
                     train: np.ndarray | None, ids: np.ndarray):
        if cfg.mode == "precomputed":
            return kernel_matrix(cfg, a, b_ids=ids)
        if train is None:
            raise UsageError(
                "tree has no training features attached; a rls_kron model "
                "with a computed kernel cannot predict without them")
        return kernel_matrix(cfg, a, train[ids])

    def to_doc(self, with_header: bool = True) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.nd_axis[i] == LEAF:
                nodes.append({
                    "kind": "leaf",
                    "model": self.leaf_models[self.nd_leaf[i]].to_doc(),
                })
            else:
                nodes.append({
                    "kind": "split",
                    "axis": "rows" if self.nd_axis[i] == AXIS_ROWS
                            else "cols",
                    "feature": int(self.nd_feat[i]),
                    "threshold": float(self.nd_thr[i]),
                    "left": int(self.nd_left[i]),
                    "right": int(self.nd_right[i]),
                })
        doc = {"seed": self.seed, "m1": self.m1, "m2": self.m2,
               "nodes": nodes}
        if with_header:
            doc["format"] = FORMAT_VERSION
            doc["params"] = self.params.to_doc()
        return doc

    @classmethod
    def from_doc(cls, doc: dict, params: TreeParams | None = None,
                 x1_train=None, x2_train=None) -> "OxyTree":
        if params is None:
            if doc.get("format") != FORMAT_VERSION:
                raise DataError(
                    f"unsupported model format {doc.get('format')!r}; "
                    f"expected {FORMAT_VERSION!r}")
            params = TreeParams.from_doc(doc["params"])
        nodes = doc["nodes"]
        n = len(nodes)
        nd_axis = np.full(n, LEAF, dtype=np.int64)
        nd_feat = np.full(n, -1, dtype=np.int64)
        nd_thr = np.zeros(n, dtype=np.float64)
        nd_left = np.full(n, -1, dtype=np.int64)
        nd_right = np.full(n, -1, dtype=np.int64)
        nd_leaf = np.full(n, -1, dtype=np.int64)
        leaf_models = []
        for i, node in enumerate(nodes):
            if node["kind"] == "leaf":
                nd_leaf[i] = len(leaf_models)
                leaf_models.append(leaf_from_doc(node["model"]))
            elif node["kind"] == "split":
                nd_axis[i] = AXIS_ROWS if node["axis"] == "rows" \
                    else AXIS_COLS
                nd_feat[i] = node["feature"]
                nd_thr[i] = node["threshold"]
                nd_left[i] = node["left"]
                nd_right[i] = node["right"]
            else:
                raise DataError(f"unknown node kind {node['kind']!r}")
        return cls(
            nd_axis=nd_axis, nd_feat=nd_feat, nd_thr=nd_thr,
            nd_left=nd_left, nd_right=nd_right, nd_leaf=nd_leaf,
            leaf_models=leaf_models, leaf_rows=None, leaf_cols=None,
            params=params, seed=int(doc["seed"]),
            m1=int(doc["m1"]), m2=int(doc["m2"]),
            x1_train=x1_train, x2_train=x2_train,
        )


def sample_candidates(x1, x2, row_idx, col_idx, params: TreeParams,
                      tree_seed: int, node_id: int = 0):
    """The candidate draw a builder node makes, as a standalone operation.

    Returns a list of (axis, feature, threshold); constant features are
    sampled but contribute no candidate (and consume no threshold draw).
    In exhaustive mode every distinct-value midpoint is a candidate.
    """
    x1 = np.ascontiguousarray(x1, dtype=np.float64)
    x2 = np.ascontiguousarray(x2, dtype=np.float64)
    row_idx = np.asarray(row_idx, dtype=np.int64)
    col_idx = np.asarray(col_idx, dtype=np.int64)
    state = _node_seed(int(tree_seed) & MASK64, node_id)
    out = []
    for axis, idx, x in ((AXIS_ROWS, row_idx, x1), (AXIS_COLS, col_idx, x2)):
        m = x.shape[1]
        setting = params.max_features_rows if axis == AXIS_ROWS \
            else params.max_features_cols
        k = resolve_max_features(setting, m)
        feats, state = sample_features(m, k, state)
        for f in feats:
            vals = x[idx, f]
            lo = vals.min()
            hi = vals.max()
            if hi <= lo:
                continue
            if params.exhaustive:
                sv = np.sort(vals)
                for p in range(sv.shape[0] - 1):
                    if sv[p] < sv[p + 1]:
                        out.append((axis, int(f),
                                    float(0.5 * (sv[p] + sv[p + 1]))))
            else:
                state, z = _sm_draw(state)
                u = (z >> 11) * _UNIT
                out.append((axis, int(f), float(lo + u * (hi - lo))))
    return out


def build_tree(x1, x2, y, params: TreeParams, seed: int,
               row_idx=None, col_idx=None, trace: GrowTrace | None = None,
               backend_name: str | None = None) -> OxyTree:
    """Grow one tree on a view of the training data and fit its leaf
    models. The view defaults to the full dataset; degenerate views
    become single-leaf trees."""
    x1 = np.ascontiguousarray(x1, dtype=np.float64)
    x2 = np.ascontiguousarray(x2, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (x1.shape[0], x2.shape[0]):
        raise UsageError(
            f"y shape {y.shape} does not match instance counts "
            f"({x1.shape[0]}, {x2.shape[0]})")
    row_idx = np.arange(x1.shape[0], dtype=np.int64) if row_idx is None \
        else np.asarray(row_idx, dtype=np.int64)
    col_idx = np.arange(x2.shape[0], dtype=np.int64) if col_idx is None \
        else np.asarray(col_idx, dtype=np.int64)
    if row_idx.shape[0] == 0 or col_idx.shape[0] == 0:
        raise UsageError("tree view is empty")
    params = resolve_params(params, x1.shape[1], x2.shape[1])
    n_norm = float(row_idx.shape[0] * col_idx.shape[0]) \
        if params.norm_mode == "global" else 0.0
    seed = int(seed) & MASK64
    name = backend.get_backend() if backend_name is None else backend_name
    if trace is not None:
        name = "numpy"
    if name == "numpy":
        from . import _kernels_numpy as kern

        parts = kern.grow_tree(
            x1, x2, y, row_idx, col_idx,
            params.min_rows, params.min_cols,
            params.max_features_rows, params.max_features_cols,
            n_norm, seed,
            naive_eval=params.naive_eval, exhaustive=params.exhaustive,
            trace=trace)
    else:
        kern = backend.kernels(name)
        parts = kern.grow_tree(
            x1, x2, y, row_idx, col_idx,
            params.min_rows, params.min_cols,
            params.max_features_rows, params.max_features_cols,
            n_norm, np.uint64(seed),
            params.naive_eval, params.exhaustive)
    (nd_axis, nd_feat, nd_thr, nd_left, nd_right, nd_leaf,
     rbuf, roff, rlen, cbuf, coff, clen) = parts
    leaf_rows = [rbuf[roff[i]:roff[i] + rlen[i]].copy()
                 for i in range(roff.shape[0])]
    leaf_cols = [cbuf[coff[i]:coff[i] + clen[i]].copy()
                 for i in range(coff.shape[0])]
    leaf_models = []
    keep_features = False
    for rows, cols in zip(leaf_rows, leaf_cols):
        if params.leaf_model == "mean":
            leaf_models.append(mean_fit(y[np.ix_(rows, cols)]))
            continue
        k1, k2 = params.kernel1, params.kernel2
        phi1 = kernel_matrix(k1, x1[rows], x1[rows], b_ids=rows)
        phi2 = kernel_matrix(k2, x2[cols], x2[cols], b_ids=cols)
        leaf_models.append(rls_kron_fit(
            phi1, phi2, y[np.ix_(rows, cols)], params.alpha,
            rows=rows, cols=cols, kernel1=k1, kernel2=k2))
        if k1.mode != "precomputed" or k2.mode != "precomputed":
            keep_features = True
    return OxyTree(
        nd_axis=nd_axis, nd_feat=nd_feat, nd_thr=nd_thr,
        nd_left=nd_left, nd_right=nd_right, nd_leaf=nd_leaf,
        leaf_models=leaf_models, leaf_rows=leaf_rows, leaf_cols=leaf_cols,
        params=params, seed=seed, m1=x1.shape[1], m2=x2.shape[1],
        x1_train=x1 if keep_features else None,
        x2_train=x2 if keep_features else None,
    )
