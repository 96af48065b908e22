"""Extremely randomized forests of biclustering trees.

Every tree sees the full training view (no bagging by default; per-axis
bootstrap resampling exists behind flags for experimentation) and gets an
independent seed derived from (master seed, tree index), so the model is a
pure function of data, hyperparameters and master seed regardless of how
many worker threads build it. Scores are the arithmetic mean over trees,
and predict_forest can restrict to the first k trees so prefix curves are
cheap to compute.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import BipartiteDataset
from .errors import DataError, UsageError
from .rng import Rng, derive_seed
from .tree import (
    FORMAT_VERSION,
    OxyTree,
    TreeParams,
    build_tree,
    resolve_params,
)


def resolve_threads(n_threads: int | None) -> int:
    """Explicit count wins; OXYFOREST_THREADS is the fallback; default 1."""
    if n_threads is None:
        env = os.environ.get("OXYFOREST_THREADS", "").strip()
        if not env:
            return 1
        try:
            n_threads = int(env)
        except ValueError:
            raise UsageError(
                f"OXYFOREST_THREADS must be an integer, got {env!r}")
    if n_threads < 1:
        raise UsageError(f"thread count must be >= 1, got {n_threads}")
    return int(n_threads)


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters: ensemble size plus the shared tree params."""

    n_trees: int = 200
    tree: TreeParams = field(default_factory=TreeParams)
    bootstrap_rows: bool = False
    bootstrap_cols: bool = False

    def __post_init__(self):
        if self.n_trees < 1:
            raise UsageError(f"n_trees must be >= 1, got {self.n_trees}")

    def to_doc(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "tree": self.tree.to_doc(),
            "bootstrap_rows": self.bootstrap_rows,
            "bootstrap_cols": self.bootstrap_cols,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ForestParams":
        return cls(
            n_trees=int(doc["n_trees"]),
            tree=TreeParams.from_doc(doc["tree"]),
            bootstrap_rows=bool(doc.get("bootstrap_rows", False)),
            bootstrap_cols=bool(doc.get("bootstrap_cols", False)),
        )


@dataclass
class OxyForest:
    trees: list
    params: ForestParams
    seed: int
    m1: int
    m2: int
    x1_train: np.ndarray | None = None
    x2_train: np.ndarray | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, x1_test, x2_test, first_k: int | None = None):
        return predict_forest(self, x1_test, x2_test, first_k)


def _tree_view(rng: Rng, n: int, bootstrap: bool) -> np.ndarray | None:
    """Sample-with-replacement view for one axis, sorted; None when off."""
    if not bootstrap:
        return None
    idx = rng.integers(n, size=n)
    idx.sort()
    return idx


def fit_forest(dataset: BipartiteDataset, params: ForestParams, seed: int,
               n_threads: int | None = None) -> OxyForest:
    """Build n_trees trees on the dataset's full training view.

    Tree i is seeded with derive_seed(seed, i) and results are placed by
    index, so the forest is identical no matter the thread count.
    """
    if not isinstance(dataset, BipartiteDataset):
        raise UsageError(
            f"fit_forest expects a BipartiteDataset, got "
            f"{type(dataset).__name__}")
    n_threads = resolve_threads(n_threads)
    tree_params = resolve_params(
        params.tree, dataset.x1.shape[1], dataset.x2.shape[1],
        similarity_features=dataset.similarity_features)
    params = replace(params, tree=tree_params)
    seed = int(seed)

    def build_one(i: int) -> OxyTree:
        tree_seed = derive_seed(seed, i)
        row_idx = col_idx = None
        if params.bootstrap_rows or params.bootstrap_cols:
            rng = Rng(derive_seed(tree_seed, 0))
            row_idx = _tree_view(rng, dataset.n1, params.bootstrap_rows)
            col_idx = _tree_view(rng, dataset.n2, params.bootstrap_cols)
        return build_tree(dataset.x1, dataset.x2, dataset.y, tree_params,
                          tree_seed, row_idx=row_idx, col_idx=col_idx)

    if n_threads == 1 or params.n_trees == 1:
        trees = [build_one(i) for i in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            trees = list(ex.map(build_one, range(params.n_trees)))
    keep = any(t.x1_train is not None for t in trees)
    return OxyForest(
        trees=trees, params=params, seed=seed,
        m1=dataset.x1.shape[1], m2=dataset.x2.shape[1],
        x1_train=dataset.x1 if keep else None,
        x2_train=dataset.x2 if keep else None,
    )


def predict_forest(forest: OxyForest, x1_test, x2_test,
                   first_k: int | None = None) -> np.ndarray:
    """Mean score matrix of the first_k (default all) trees."""
    k = forest.n_trees if first_k is None else int(first_k)
    if not 1 <= k <= forest.n_trees:
        raise UsageError(
            f"first_k must be in [1, {forest.n_trees}], got {first_k}")
    x1t = np.ascontiguousarray(x1_test, dtype=np.float64)
    x2t = np.ascontiguousarray(x2_test, dtype=np.float64)
    acc = forest.trees[0].predict(x1t, x2t)
    for tree in forest.trees[1:k]:
        acc = acc + tree.predict(x1t, x2t)
    return acc / k


def tree_scores(forest: OxyForest, x1_test, x2_test) -> np.ndarray:
    """Per-tree score matrices, stacked (n_trees, t1, t2); the raw material
    for prefix curves and the tree-count bootstrap."""
    x1t = np.ascontiguousarray(x1_test, dtype=np.float64)
    x2t = np.ascontiguousarray(x2_test, dtype=np.float64)
    return np.stack([tree.predict(x1t, x2t) for tree in forest.trees])


def forest_to_doc(forest: OxyForest) -> dict:
    doc = {
        "format": FORMAT_VERSION,
        "kind": "forest",
        "seed": forest.seed,
        "m1": forest.m1,
        "m2": forest.m2,
        "params": forest.params.to_doc(),
        "trees": [t.to_doc(with_header=False) for t in forest.trees],
    }
    if forest.x1_train is not None:
        doc["train_features"] = {
            "x1": forest.x1_train.tolist(),
            "x2": forest.x2_train.tolist(),
        }
    return doc


def forest_from_doc(doc: dict) -> OxyForest:
    if doc.get("format") != FORMAT_VERSION:
        raise DataError(
            f"unsupported model format {doc.get('format')!r}; "
            f"expected {FORMAT_VERSION!r}")
    if doc.get("kind") != "forest":
        raise DataError(f"expected a forest document, got {doc.get('kind')!r}")
    params = ForestParams.from_doc(doc["params"])
    x1_train = x2_train = None
    if "train_features" in doc:
        x1_train = np.asarray(doc["train_features"]["x1"], dtype=np.float64)
        x2_train = np.asarray(doc["train_features"]["x2"], dtype=np.float64)
    trees = [
        OxyTree.from_doc(td, params=params.tree,
                         x1_train=x1_train, x2_train=x2_train)
        for td in doc["trees"]
    ]
    return OxyForest(
        trees=trees, params=params, seed=int(doc["seed"]),
        m1=int(doc["m1"]), m2=int(doc["m2"]),
        x1_train=x1_train, x2_train=x2_train,
    )


def save_forest(forest: OxyForest, path) -> None:
    text = json.dumps(forest_to_doc(forest), sort_keys=True,
                      separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_forest(path) -> OxyForest:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model file {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: not valid JSON: {exc}") from exc
    return forest_from_doc(doc)
