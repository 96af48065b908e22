"""Biclustering model trees for bipartite interaction prediction.

Trees split the rows or the columns of a binary interaction matrix using
per-axis proxy statistics, carry kernel ridge models in their leaves, and
ensemble into extremely randomized forests. The public surface here
covers data handling, training, prediction, persistence, metrics, the
evaluation harness, and the complexity benchmarks; `oxyforest.backend`
switches between the compiled kernels and the pure-numpy fallback.
"""

from .backend import available_backends, get_backend, set_backend
from .bench import (
    BenchResult,
    bench_backends,
    bench_build,
    bench_inference,
    build_random_tree,
    fit_slope,
    gen_synthetic,
)
from .data import (
    BipartiteDataset,
    CarvedSplit,
    CvSplit,
    DyadSet,
    carve_split,
    load_dataset,
    load_matrix,
    mask_positives,
    save_matrix,
    stratified_kfold,
)
from .ensemble import (
    ForestParams,
    OxyForest,
    fit_forest,
    load_forest,
    predict_forest,
    save_forest,
    tree_scores,
)
from .errors import (
    DataError,
    NumericError,
    OxyError,
    UndefinedMetricError,
    UsageError,
)
from .evaluate import (
    EvaluationReport,
    LeafSweepReport,
    ReportEntry,
    leaf_size_sweep,
    run_cv,
    tree_count_bootstrap,
)
from .impurity import ProxyPair, build_proxies, delta_impurity, impurity, \
    scan_axis_splits
from .leafmodels import (
    KernelConfig,
    MeanLeaf,
    RlsKronLeaf,
    kernel_matrix,
    mean_fit,
    rls_kron_fit,
    rls_kron_predict,
)
from .metrics import auprc, auroc
from .rng import Rng, derive_seed
from .tree import OxyTree, TreeParams, build_tree, sample_candidates

__version__ = "0.1.0"

__all__ = [
    "BenchResult",
    "BipartiteDataset",
    "CarvedSplit",
    "CvSplit",
    "DataError",
    "DyadSet",
    "EvaluationReport",
    "ForestParams",
    "KernelConfig",
    "LeafSweepReport",
    "MeanLeaf",
    "NumericError",
    "OxyError",
    "OxyForest",
    "OxyTree",
    "ProxyPair",
    "ReportEntry",
    "RlsKronLeaf",
    "Rng",
    "TreeParams",
    "UndefinedMetricError",
    "UsageError",
    "auprc",
    "auroc",
    "available_backends",
    "bench_backends",
    "bench_build",
    "bench_inference",
    "build_proxies",
    "build_random_tree",
    "build_tree",
    "carve_split",
    "delta_impurity",
    "derive_seed",
    "fit_forest",
    "fit_slope",
    "gen_synthetic",
    "get_backend",
    "impurity",
    "kernel_matrix",
    "leaf_size_sweep",
    "load_dataset",
    "load_forest",
    "load_matrix",
    "mask_positives",
    "mean_fit",
    "predict_forest",
    "rls_kron_fit",
    "rls_kron_predict",
    "run_cv",
    "sample_candidates",
    "save_forest",
    "save_matrix",
    "scan_axis_splits",
    "set_backend",
    "stratified_kfold",
    "tree_count_bootstrap",
    "tree_scores",
    "__version__",
]
