"""Synthetic data generation and the empirical complexity experiments.

Two timing studies: tree construction (proxy-statistics builder vs the
naive per-candidate re-aggregation, plus the fully deep 1x1-leaf variant)
and inference (batch leaf assignment vs walking every dyad down the
tree). Times come from a monotonic clock after a discarded warm-up: build
points record the median of repeated runs, inference points interleave the
two procedures and record each one's best repeat so load spikes cannot skew
their ratio. Asymptotic behavior is summarized by the log-log slope of the
tail of the size grid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .data import BipartiteDataset
from .errors import UsageError
from .leafmodels import MeanLeaf
from .rng import Rng, derive_seed
from .tree import LEAF, AXIS_COLS, AXIS_ROWS, OxyTree, TreeParams, build_tree

_BENCH_FEATURES = 8


@dataclass
class BenchResult:
    """Timing table: seconds per (method, size) plus fitted log-log slopes.

    sizes is the primary size axis (n1 for build, n_train for inference);
    any secondary axis lives in metadata.
    """

    sizes: list[int]
    times: dict[str, list[float]]
    slopes: dict[str, tuple[float, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise UsageError(f"sizes must be strictly increasing: {self.sizes}")
        for method, ts in self.times.items():
            if len(ts) != len(self.sizes):
                raise UsageError(
                    f"method {method!r} has {len(ts)} times for "
                    f"{len(self.sizes)} sizes")
            if any(t <= 0.0 for t in ts):
                raise UsageError(f"nonpositive time for method {method!r}")

    def to_tsv(self) -> str:
        lines = ["method\tn\tseconds"]
        for method in sorted(self.times):
            for n, t in zip(self.sizes, self.times[method]):
                lines.append(f"{method}\t{n}\t{t:.9f}")
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "times": {m: list(ts) for m, ts in self.times.items()},
            "slopes": {m: {"slope": s, "stderr": e}
                       for m, (s, e) in self.slopes.items()},
            "metadata": self.metadata,
        }


def gen_synthetic(n1: int, n2: int, m1: int, m2: int, density: float,
                  seed: int) -> BipartiteDataset:
    """Uniform [0,1) features and Bernoulli(density) interactions.

    Draw order is fixed (X1 block, X2 block, Y block), so the dataset is
    a pure function of the arguments.
    """
    for name, v in (("n1", n1), ("n2", n2), ("m1", m1), ("m2", m2)):
        if v < 1:
            raise UsageError(f"{name} must be >= 1, got {v}")
    if not 0.0 < density < 1.0:
        raise UsageError(f"density must be in (0, 1), got {density}")
    rng = Rng(seed)
    x1 = rng.uniform(n1 * m1).reshape(n1, m1)
    x2 = rng.uniform(n2 * m2).reshape(n2, m2)
    y = (rng.uniform(n1 * n2).reshape(n1, n2) < density).astype(np.float64)
    return BipartiteDataset(x1, x2, y)


def fit_slope(sizes, times, tail_fraction: float = 0.10) -> tuple[float, float]:
    """Log-log OLS slope over the tail of the grid, with its standard error.

    The tail is the last max(2, ceil(tail_fraction * len)) points; two
    points give an exact line and a zero standard error.
    """
    n_arr = np.asarray(sizes, dtype=np.float64).ravel()
    t_arr = np.asarray(times, dtype=np.float64).ravel()
    if n_arr.shape[0] != t_arr.shape[0]:
        raise UsageError(
            f"sizes and times disagree in length: {n_arr.shape[0]} vs "
            f"{t_arr.shape[0]}")
    if n_arr.shape[0] < 2:
        raise UsageError("need at least 2 points to fit a slope")
    if (n_arr <= 0.0).any():
        raise UsageError("sizes must be positive")
    if (t_arr <= 0.0).any():
        raise UsageError("times must be positive")
    tail = max(2, math.ceil(tail_fraction * n_arr.shape[0]))
    x = np.log(n_arr[-tail:])
    y = np.log(t_arr[-tail:])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise UsageError("tail sizes are all equal; slope is undefined")
    slope = float(xc @ (y - y.mean())) / sxx
    if tail == 2:
        return slope, 0.0
    resid = (y - y.mean()) - slope * xc
    var = float(resid @ resid) / (tail - 2)
    return slope, math.sqrt(var / sxx)


def _median_seconds(fn, repeats: int) -> float:
    """Median of `repeats` timed runs after one discarded warm-up."""
    fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def _interleaved_medians(fns, repeats: int) -> dict[str, float]:
    """Median of `repeats` timed runs per callable, one discarded warm-up
    each, with the timed runs interleaved round-robin: a machine load
    spike then lands on every callable alike instead of skewing whichever
    one owned that stretch of wall clock, which matters when the outputs
    are compared as ratios."""
    samples: dict[str, list[float]] = {name: [] for name in fns}
    for fn in fns.values():
        fn()
    for _ in range(repeats):
        for name, fn in fns.items():
            t0 = time.perf_counter()
            fn()
            samples[name].append(time.perf_counter() - t0)
    return {name: float(np.median(s)) for name, s in samples.items()}


_BUILD_VARIANTS = {
    "proxy": {},
    "naive": {"naive_eval": True},
    "deep": {"min_rows": 1, "min_cols": 1},
}


def bench_build(sizes, repeats: int = 3, seed: int = 0,
                backend_name: str | None = None) -> BenchResult:
    """Time single-tree construction on n x n data with m = n.

    All variants scan every feature per node (max_features 'all') so the
    proxy and naive builders search the identical candidate set; leaves
    are plain means to keep leaf fitting out of the builder timing.
    """
    sizes = [int(n) for n in sizes]
    if repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {repeats}")
    times: dict[str, list[float]] = {m: [] for m in _BUILD_VARIANTS}
    for i, n in enumerate(sizes):
        ds = gen_synthetic(n, n, n, n, 0.5, derive_seed(seed, i))
        tree_seed = derive_seed(seed, 1000 + i)
        runs = {}
        for method, overrides in _BUILD_VARIANTS.items():
            params = TreeParams(
                max_features_rows="all", max_features_cols="all",
                leaf_model="mean", **overrides)
            runs[method] = (lambda p=params: build_tree(
                ds.x1, ds.x2, ds.y, p, tree_seed,
                backend_name=backend_name))
        for method, sec in _interleaved_medians(runs, repeats).items():
            times[method].append(sec)
    slopes = {}
    if len(sizes) >= 2:
        slopes = {m: fit_slope(sizes, ts) for m, ts in times.items()}
    return BenchResult(
        sizes=sizes, times=times, slopes=slopes,
        metadata={"kind": "build", "repeats": repeats, "seed": int(seed),
                  "backend": backend_name or backend.get_backend()})


def random_tree_depth(n_train: int) -> int:
    """Depth used for the inference benchmark's random trees; grows with
    log(n_train) the way a balanced tree on n_train instances would.

    The factor keeps the leaf count well under a 512-wide test grid so
    batch assignment stays dominated by its per-dyad output term rather
    than by per-node segment bookkeeping.
    """
    return max(1, math.ceil(0.5 * math.log2(n_train)))


def build_random_tree(m1: int, m2: int, depth: int, seed: int) -> OxyTree:
    """Full binary tree of the given depth with uniformly random split
    rules and zero-valued mean leaves; no data touches the build."""
    if depth < 1:
        raise UsageError(f"depth must be >= 1, got {depth}")
    rng = Rng(seed)
    nd_axis: list[int] = []
    nd_feat: list[int] = []
    nd_thr: list[float] = []
    nd_left: list[int] = []
    nd_right: list[int] = []
    nd_leaf: list[int] = []
    leaf_models: list[MeanLeaf] = []

    def grow(level: int) -> int:
        nid = len(nd_axis)
        nd_axis.append(LEAF)
        nd_feat.append(-1)
        nd_thr.append(0.0)
        nd_left.append(-1)
        nd_right.append(-1)
        nd_leaf.append(-1)
        if level == depth:
            nd_leaf[nid] = len(leaf_models)
            leaf_models.append(MeanLeaf(0.0))
            return nid
        axis = AXIS_ROWS if rng.integers(2) == 0 else AXIS_COLS
        m = m1 if axis == AXIS_ROWS else m2
        nd_axis[nid] = axis
        nd_feat[nid] = int(rng.integers(m))
        nd_thr[nid] = float(rng.uniform())
        nd_left[nid] = grow(level + 1)
        nd_right[nid] = grow(level + 1)
        return nid

    grow(0)
    return OxyTree(
        nd_axis=np.array(nd_axis, dtype=np.int64),
        nd_feat=np.array(nd_feat, dtype=np.int64),
        nd_thr=np.array(nd_thr, dtype=np.float64),
        nd_left=np.array(nd_left, dtype=np.int64),
        nd_right=np.array(nd_right, dtype=np.int64),
        nd_leaf=np.array(nd_leaf, dtype=np.int64),
        leaf_models=leaf_models, leaf_rows=None, leaf_cols=None,
        params=TreeParams(min_rows=1, min_cols=1, leaf_model="mean"),
        seed=int(seed), m1=m1, m2=m2,
    )


def bench_inference(n_train_grid, n_test_grid, repeats: int = 3,
                    seed: int = 0, trees_per_size: int = 1) -> BenchResult:
    """Time batch leaf assignment against per-dyad traversal on the full
    test grid.

    Random trees whose depth tracks log(n_train) stand in for trees fit
    on n_train instances; per grid point the reported time sums the best
    run of each of `trees_per_size` independent trees, which averages out
    structure-dependent cache effects. A single test size is broadcast
    across the train grid; otherwise the grids pair up elementwise. Both
    procedures materialize the complete dyad-to-leaf grid.
    """
    n_train_grid = [int(n) for n in n_train_grid]
    n_test_grid = [int(n) for n in n_test_grid]
    if repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {repeats}")
    if trees_per_size < 1:
        raise UsageError(f"trees_per_size must be >= 1, got {trees_per_size}")
    if len(n_test_grid) == 1:
        n_test_grid = n_test_grid * len(n_train_grid)
    if len(n_test_grid) != len(n_train_grid):
        raise UsageError(
            f"test grid must have one size or match the train grid: "
            f"{len(n_test_grid)} vs {len(n_train_grid)}")
    if any(b <= a for a, b in zip(n_train_grid, n_train_grid[1:])):
        raise UsageError(
            f"train sizes must be strictly increasing: {n_train_grid}")
    times: dict[str, list[float]] = {"batch": [], "per_dyad": []}
    for i, (n_tr, n_te) in enumerate(zip(n_train_grid, n_test_grid)):
        rng = Rng(derive_seed(seed, 1000 + i))
        x1t = rng.uniform(n_te * _BENCH_FEATURES).reshape(n_te, -1)
        x2t = rng.uniform(n_te * _BENCH_FEATURES).reshape(n_te, -1)
        batch_s = 0.0
        dyad_s = 0.0
        for t in range(trees_per_size):
            tree = build_random_tree(
                _BENCH_FEATURES, _BENCH_FEATURES, random_tree_depth(n_tr),
                derive_seed(seed, i * 1024 + t))
            # Interleave the two timers so machine-load spikes hit both
            # procedures alike instead of skewing their ratio.
            tree.leaf_grid(x1t, x2t, per_dyad=False)
            tree.leaf_grid(x1t, x2t, per_dyad=True)
            best_b = math.inf
            best_d = math.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                tree.leaf_grid(x1t, x2t, per_dyad=False)
                best_b = min(best_b, time.perf_counter() - t0)
                t0 = time.perf_counter()
                tree.leaf_grid(x1t, x2t, per_dyad=True)
                best_d = min(best_d, time.perf_counter() - t0)
            batch_s += best_b
            dyad_s += best_d
        times["batch"].append(batch_s)
        times["per_dyad"].append(dyad_s)
    slopes = {}
    if len(n_train_grid) >= 2:
        slopes = {m: fit_slope(n_train_grid, ts) for m, ts in times.items()}
    return BenchResult(
        sizes=n_train_grid, times=times, slopes=slopes,
        metadata={"kind": "inference", "n_test": n_test_grid,
                  "repeats": repeats, "seed": int(seed),
                  "trees_per_size": trees_per_size,
                  "backend": backend.get_backend()})


def bench_backends(sizes, repeats: int = 3, seed: int = 0) -> BenchResult:
    """Time the proxy builder under each installed kernel backend on the
    same datasets; one row per backend."""
    sizes = [int(n) for n in sizes]
    times: dict[str, list[float]] = {
        name: [] for name in backend.available_backends()}
    for i, n in enumerate(sizes):
        ds = gen_synthetic(n, n, n, n, 0.5, derive_seed(seed, i))
        tree_seed = derive_seed(seed, 1000 + i)
        params = TreeParams(max_features_rows="all",
                            max_features_cols="all", leaf_model="mean")
        for name in times:
            times[name].append(_median_seconds(
                lambda: build_tree(ds.x1, ds.x2, ds.y, params, tree_seed,
                                   backend_name=name),
                repeats))
    slopes = {}
    if len(sizes) >= 2:
        slopes = {m: fit_slope(sizes, ts) for m, ts in times.items()}
    return BenchResult(
        sizes=sizes, times=times, slopes=slopes,
        metadata={"kind": "backends", "repeats": repeats, "seed": int(seed)})
