"""Bipartite dataset container, matrix text I/O, cross-validation splits,
and positive masking.

A dataset is two feature matrices and a binary interaction matrix between
their instances. Cross-validation folds each domain independently; a
(row-fold, col-fold) pair induces the five dyad regions: LD (train rows x
train cols, the learning block), TD (dyads masked inside LD plus LD's
zeros), LT (train rows x test cols), TL (test rows x train cols), and TT
(test rows x test cols).

File and contract problems raise differently: unreadable or unparseable
files raise DataError (CLI exit 2), while well-formed inputs that violate
a documented contract (shape mismatch, non-binary labels, bad fold counts)
raise UsageError (CLI exit 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, UsageError
from .linalg import as_matrix
from .rng import Rng


def load_matrix(path, allow_empty: bool = False) -> np.ndarray:
    """Read a dense matrix: one row per line, tab-separated decimal
    literals, `#`-prefixed comment lines ignored, no header.

    A file with no data rows is an error unless allow_empty is set, in
    which case it loads as a 0 x 0 matrix (prediction on zero instances
    is well defined; a dataset with zero instances is not)."""
    rows: list[list[float]] = []
    width = -1
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: not a decimal literal: {exc}") from exc
            if width < 0:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} columns, "
                    f"got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        if allow_empty:
            return np.empty((0, 0), dtype=np.float64)
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def save_matrix(path, a) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise UsageError(f"save_matrix needs a 2-d array, got ndim={a.ndim}")
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for row in a:
                handle.write("\t".join(f"{v:.17g}" for v in row))
                handle.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class BipartiteDataset:
    """Row-domain features x1 (n1 x m1), column-domain features x2
    (n2 x m2), and a binary interaction matrix y (n1 x n2).

    similarity_features marks x1/x2 as precomputed similarities indexed by
    training instances, which makes carve_split column-restrict every
    feature matrix to the training instances of its domain.
    """

    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    similarity_features: bool = False

    def __post_init__(self):
        x1 = as_matrix(self.x1, "x1")
        x2 = as_matrix(self.x2, "x2")
        y = as_matrix(self.y, "y")
        if y.shape != (x1.shape[0], x2.shape[0]):
            raise UsageError(
                f"y shape {y.shape} does not match "
                f"(x1 rows, x2 rows) = ({x1.shape[0]}, {x2.shape[0]})")
        if not np.isin(y, (0.0, 1.0)).all():
            bad = y[~np.isin(y, (0.0, 1.0))].flat[0]
            raise UsageError(f"non-binary label in y: {bad}")
        if self.similarity_features:
            if x1.shape[1] != x1.shape[0] or x2.shape[1] != x2.shape[0]:
                raise UsageError(
                    "similarity features must be square per domain: "
                    f"x1 {x1.shape}, x2 {x2.shape}")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "y", y)

    @property
    def n1(self) -> int:
        return self.x1.shape[0]

    @property
    def n2(self) -> int:
        return self.x2.shape[0]


def load_dataset(x1_path, x2_path, y_path,
                 similarity_features: bool = False) -> BipartiteDataset:
    return BipartiteDataset(
        load_matrix(x1_path),
        load_matrix(x2_path),
        load_matrix(y_path),
        similarity_features=similarity_features,
    )


@dataclass(frozen=True)
class CvSplit:
    """One cell of the k1 x k2 cross-validation grid.

    Index arrays are sorted ascending. masked_dyads holds (row, col)
    global indices of positives flipped to zero inside the learning
    block; it is empty until mask_positives fills it.
    """

    row_train: np.ndarray
    row_test: np.ndarray
    col_train: np.ndarray
    col_test: np.ndarray
    fold: tuple[int, int]
    pmp: float = 0.0
    masked_dyads: np.ndarray = field(
        default_factory=lambda: np.empty((0, 2), dtype=np.int64))


@dataclass(frozen=True)
class DyadSet:
    """Dyads to score, as parallel index/label arrays local to some block."""

    rows: np.ndarray
    cols: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.rows.shape[0]


def _degree_folds(degree: np.ndarray, k: int, rng: Rng) -> list[np.ndarray]:
    """Deal instances into k folds round-robin in degree-sorted order.

    Ties in degree are broken by a seeded shuffle so fold contents are
    deterministic per seed without favoring low indices.
    """
    n = degree.shape[0]
    tie = rng.permutation(n)
    rank = np.empty(n, dtype=np.int64)
    rank[tie] = np.arange(n, dtype=np.int64)
    order = np.lexsort((rank, degree))
    folds: list[list[int]] = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(int(idx))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def stratified_kfold(dataset: BipartiteDataset, k1: int, k2: int,
                     rng: Rng) -> list[CvSplit]:
    """k1 x k2 grid of splits, folding each domain by label stratification:
    instances are sorted by their positive count and dealt round-robin."""
    if k1 < 2 or k2 < 2:
        raise UsageError(f"fold counts must be >= 2, got k1={k1}, k2={k2}")
    if k1 > dataset.n1 or k2 > dataset.n2:
        raise UsageError(
            f"fold counts (k1={k1}, k2={k2}) exceed instance counts "
            f"({dataset.n1}, {dataset.n2})")
    row_folds = _degree_folds(dataset.y.sum(axis=1), k1, rng.child(0))
    col_folds = _degree_folds(dataset.y.sum(axis=0), k2, rng.child(1))
    all_rows = np.arange(dataset.n1, dtype=np.int64)
    all_cols = np.arange(dataset.n2, dtype=np.int64)
    splits = []
    for f1 in range(k1):
        row_test = row_folds[f1]
        row_train = np.setdiff1d(all_rows, row_test)
        for f2 in range(k2):
            col_test = col_folds[f2]
            col_train = np.setdiff1d(all_cols, col_test)
            splits.append(CvSplit(
                row_train=row_train,
                row_test=row_test,
                col_train=col_train,
                col_test=col_test,
                fold=(f1, f2),
            ))
    return splits


def mask_positives(dataset: BipartiteDataset, split: CvSplit, pmp: float,
                   rng: Rng) -> tuple[CvSplit, np.ndarray, DyadSet]:
    """Flip round(pmp x P) of the learning block's positives to zero.

    Returns (split with masked_dyads and pmp recorded, y_learn, eval_td).
    y_learn is the masked learning block; eval_td holds the masked dyads
    labeled 1 plus every originally-zero learning dyad labeled 0, with
    indices local to the learning block.
    """
    if not 0.0 <= pmp < 1.0:
        raise UsageError(f"pmp must be in [0, 1), got {pmp}")
    y_ld = dataset.y[np.ix_(split.row_train, split.col_train)].copy()
    pos_r, pos_c = np.nonzero(y_ld == 1.0)
    zero_r, zero_c = np.nonzero(y_ld == 0.0)
    n_mask = int(np.floor(pmp * pos_r.shape[0] + 0.5))
    if n_mask > 0:
        pick = rng.permutation(pos_r.shape[0])[:n_mask]
        pick.sort()
        mr, mc = pos_r[pick], pos_c[pick]
        y_ld[mr, mc] = 0.0
    else:
        mr = np.empty(0, dtype=np.int64)
        mc = np.empty(0, dtype=np.int64)
    eval_td = DyadSet(
        rows=np.concatenate([mr, zero_r]).astype(np.int64),
        cols=np.concatenate([mc, zero_c]).astype(np.int64),
        labels=np.concatenate([np.ones(mr.shape[0]),
                               np.zeros(zero_r.shape[0])]),
    )
    masked_global = np.stack(
        [split.row_train[mr], split.col_train[mc]], axis=1
    ) if n_mask > 0 else np.empty((0, 2), dtype=np.int64)
    new_split = replace(split, pmp=pmp, masked_dyads=masked_global)
    return new_split, y_ld, eval_td


@dataclass(frozen=True)
class CarvedSplit:
    """Materialized views of one CvSplit ready for fitting and scoring.

    x1_train/x2_train/y_learn define the learning problem (y_learn has the
    split's masked positives already zeroed). Test feature matrices are
    column-restricted to training instances when the dataset carries
    similarity features, so their widths always match the training ones.
    """

    x1_train: np.ndarray
    x2_train: np.ndarray
    y_learn: np.ndarray
    eval_td: DyadSet
    x1_test: np.ndarray
    x2_test: np.ndarray
    y_lt: np.ndarray
    y_tl: np.ndarray
    y_tt: np.ndarray


def carve_split(dataset: BipartiteDataset, split: CvSplit) -> CarvedSplit:
    """Cut the five evaluation regions for one split.

    Applies split.masked_dyads to the learning block; call mask_positives
    first (a split fresh from stratified_kfold carves with pmp = 0).
    """
    for name, idx in (("row_train", split.row_train),
                      ("row_test", split.row_test),
                      ("col_train", split.col_train),
                      ("col_test", split.col_test)):
        if idx.shape[0] == 0:
            raise UsageError(f"split has an empty {name} partition")
    rtr, rte = split.row_train, split.row_test
    ctr, cte = split.col_train, split.col_test
    y_ld = dataset.y[np.ix_(rtr, ctr)].copy()
    zero_r, zero_c = np.nonzero(y_ld == 0.0)
    if split.masked_dyads.shape[0] > 0:
        lr = np.searchsorted(rtr, split.masked_dyads[:, 0])
        lc = np.searchsorted(ctr, split.masked_dyads[:, 1])
        y_ld[lr, lc] = 0.0
        td_rows = np.concatenate([lr, zero_r]).astype(np.int64)
        td_cols = np.concatenate([lc, zero_c]).astype(np.int64)
        td_labels = np.concatenate(
            [np.ones(lr.shape[0]), np.zeros(zero_r.shape[0])])
    else:
        td_rows = zero_r.astype(np.int64)
        td_cols = zero_c.astype(np.int64)
        td_labels = np.zeros(zero_r.shape[0])
    if dataset.similarity_features:
        x1_train = dataset.x1[np.ix_(rtr, rtr)]
        x2_train = dataset.x2[np.ix_(ctr, ctr)]
        x1_test = dataset.x1[np.ix_(rte, rtr)]
        x2_test = dataset.x2[np.ix_(cte, ctr)]
    else:
        x1_train = dataset.x1[rtr]
        x2_train = dataset.x2[ctr]
        x1_test = dataset.x1[rte]
        x2_test = dataset.x2[cte]
    return CarvedSplit(
        x1_train=x1_train,
        x2_train=x2_train,
        y_learn=y_ld,
        eval_td=DyadSet(td_rows, td_cols, td_labels),
        x1_test=x1_test,
        x2_test=x2_test,
        y_lt=dataset.y[np.ix_(rtr, cte)].copy(),
        y_tl=dataset.y[np.ix_(rte, ctr)].copy(),
        y_tt=dataset.y[np.ix_(rte, cte)].copy(),
    )
