"""Command-line entry point.

Subcommands: fit, predict, cv, sweep-leaf, sweep-trees, bench, gen. Every
randomized command requires --seed; nothing falls back to the wall clock.
An optional --config JSON supplies any long-tail option, with explicit
flags taking precedence. Exit codes: 0 success, 1 contract or usage
violation, 2 file problem.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import bench_backends, bench_build, bench_inference, gen_synthetic
from .data import (
    BipartiteDataset,
    carve_split,
    load_dataset,
    load_matrix,
    save_matrix,
    stratified_kfold,
)
from .ensemble import (
    ForestParams,
    fit_forest,
    load_forest,
    predict_forest,
    save_forest,
)
from .errors import DataError, OxyError, UsageError
from .evaluate import (
    METRICS,
    forest_tree_scores,
    leaf_size_sweep,
    run_cv,
    tree_count_bootstrap,
)
from .leafmodels import KernelConfig
from .rng import Rng, derive_seed
from .tree import TreeParams


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract reserves 2 for
    file problems, so remap parse failures to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(p) for p in str(text).split(",") if p.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated integer list: {text!r}") \
            from exc


def _parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(p) for p in str(text).split(",") if p.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated number list: {text!r}") \
            from exc


def _parse_dims(text) -> list[tuple[int, int]]:
    if isinstance(text, (list, tuple)):
        return [(int(a), int(b)) for a, b in text]
    dims = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        pieces = part.lower().split("x")
        if len(pieces) != 2:
            raise UsageError(
                f"leaf dims must look like 5x5, got {part!r}")
        try:
            dims.append((int(pieces[0]), int(pieces[1])))
        except ValueError as exc:
            raise UsageError(
                f"leaf dims must look like 5x5, got {part!r}") from exc
    if not dims:
        raise UsageError(f"no leaf dims in {text!r}")
    return dims


def _parse_max_features(text):
    """'sqrt' -> per-axis default, 'all' -> every feature, else a count."""
    if text is None or text == "sqrt":
        return None
    if text == "all":
        return "all"
    try:
        return int(text)
    except (TypeError, ValueError) as exc:
        raise UsageError(
            f"max features must be 'sqrt', 'all' or a count, got {text!r}") \
            from exc


def _parse_kernel(text) -> KernelConfig | None:
    """'auto' defers to the data defaults; 'precomputed', 'linear' and
    'rbf:GAMMA' are explicit."""
    if text is None or text == "auto":
        return None
    if isinstance(text, dict):
        return KernelConfig.from_doc(text)
    head, _, tail = str(text).partition(":")
    if head == "rbf":
        if not tail:
            raise UsageError("rbf kernel needs a gamma, e.g. rbf:0.125")
        try:
            return KernelConfig(mode="rbf", gamma=float(tail))
        except ValueError as exc:
            raise UsageError(f"bad rbf gamma {tail!r}") from exc
    if tail:
        raise UsageError(f"kernel {head!r} takes no parameter")
    return KernelConfig(mode=head)


_MODEL_DEFAULTS = {
    "trees": 200,
    "min_rows": 5,
    "min_cols": 5,
    "max_features_rows": "sqrt",
    "max_features_cols": "sqrt",
    "leaf_model": "rls_kron",
    "alpha": 1.0,
    "kernel1": "auto",
    "kernel2": "auto",
    "norm_mode": "global",
    "similarity": False,
    "bootstrap_rows": False,
    "bootstrap_cols": False,
}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, help="number of trees (default 200)")
    p.add_argument("--min-rows", type=int, dest="min_rows",
                   help="minimum leaf rows (default 5)")
    p.add_argument("--min-cols", type=int, dest="min_cols",
                   help="minimum leaf cols (default 5)")
    p.add_argument("--max-features-rows", dest="max_features_rows",
                   help="'sqrt' (default), 'all' or a count")
    p.add_argument("--max-features-cols", dest="max_features_cols",
                   help="'sqrt' (default), 'all' or a count")
    p.add_argument("--leaf-model", dest="leaf_model",
                   choices=["rls_kron", "mean"],
                   help="leaf model (default rls_kron)")
    p.add_argument("--alpha", type=float, help="ridge strength (default 1)")
    p.add_argument("--kernel1", help="row kernel: auto (default), "
                   "precomputed, linear, or rbf:GAMMA")
    p.add_argument("--kernel2", help="column kernel, same forms")
    p.add_argument("--norm-mode", dest="norm_mode",
                   choices=["global", "node"],
                   help="gain normalizer (default global)")
    p.add_argument("--similarity", action="store_true", default=None,
                   help="feature matrices are similarities to training "
                   "instances")
    p.add_argument("--bootstrap-rows", dest="bootstrap_rows",
                   action="store_true", default=None,
                   help="bootstrap the row view per tree")
    p.add_argument("--bootstrap-cols", dest="bootstrap_cols",
                   action="store_true", default=None,
                   help="bootstrap the column view per tree")


def _forest_params(opt: dict) -> ForestParams:
    tree = TreeParams(
        min_rows=int(opt["min_rows"]),
        min_cols=int(opt["min_cols"]),
        max_features_rows=_parse_max_features(opt["max_features_rows"]),
        max_features_cols=_parse_max_features(opt["max_features_cols"]),
        leaf_model=opt["leaf_model"],
        alpha=float(opt["alpha"]),
        kernel1=_parse_kernel(opt["kernel1"]),
        kernel2=_parse_kernel(opt["kernel2"]),
        norm_mode=opt["norm_mode"],
    )
    return ForestParams(
        n_trees=int(opt["trees"]),
        tree=tree,
        bootstrap_rows=bool(opt["bootstrap_rows"]),
        bootstrap_cols=bool(opt["bootstrap_cols"]),
    )


def _merge_options(args: argparse.Namespace, parser: _Parser,
                   defaults: dict, required: tuple[str, ...]) -> dict:
    """defaults < --config JSON < explicit flags; unknown config keys and
    missing required options are usage errors."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        path = Path(config_path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        for key, value in doc.items():
            key = key.replace("-", "_")
            if key not in merged:
                raise UsageError(f"{path}: unknown config key {key!r}")
            merged[key] = value
    for key, value in vars(args).items():
        if key in ("command", "config", "func", "subparser"):
            continue
        if value is not None:
            merged[key] = value
    for key in required:
        if merged.get(key) is None:
            parser.error(
                f"the following argument is required: --{key.replace('_', '-')}")
    return merged


def _load_dataset(opt: dict) -> BipartiteDataset:
    return load_dataset(opt["x1"], opt["x2"], opt["y"],
                        similarity_features=bool(opt["similarity"]))


def _write_reports(opt: dict, tsv: str, doc: dict) -> None:
    if opt.get("out"):
        Path(opt["out"]).write_text(tsv, encoding="utf-8")
    else:
        sys.stdout.write(tsv)
    if opt.get("out_json"):
        Path(opt["out_json"]).write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n",
            encoding="utf-8")


def cmd_fit(args, parser) -> int:
    opt = _merge_options(args, parser, {
        **_MODEL_DEFAULTS,
        "x1": None, "x2": None, "y": None, "out": None,
        "seed": None, "threads": None,
    }, required=("x1", "x2", "y", "out", "seed"))
    dataset = _load_dataset(opt)
    forest = fit_forest(dataset, _forest_params(opt), int(opt["seed"]),
                        n_threads=opt["threads"])
    save_forest(forest, opt["out"])
    print(f"wrote {forest.n_trees} trees to {opt['out']}")
    return 0


def cmd_predict(args, parser) -> int:
    opt = _merge_options(args, parser, {
        "model": None, "x1": None, "x2": None, "out": None,
        "first_k": None,
    }, required=("model", "x1", "x2", "out"))
    forest = load_forest(opt["model"])
    x1t = load_matrix(opt["x1"], allow_empty=True)
    x2t = load_matrix(opt["x2"], allow_empty=True)
    if x1t.shape[0] == 0:
        x1t = x1t.reshape(0, forest.m1)
    if x2t.shape[0] == 0:
        x2t = x2t.reshape(0, forest.m2)
    if x1t.shape[0] == 0 or x2t.shape[0] == 0:
        save_matrix(opt["out"], np.empty((x1t.shape[0], x2t.shape[0])))
        return 0
    first_k = None if opt["first_k"] is None else int(opt["first_k"])
    scores = predict_forest(forest, x1t, x2t, first_k=first_k)
    save_matrix(opt["out"], scores)
    return 0


def cmd_cv(args, parser) -> int:
    opt = _merge_options(args, parser, {
        **_MODEL_DEFAULTS,
        "x1": None, "x2": None, "y": None,
        "k1": 2, "k2": 2, "pmp": "0,0.25,0.5,0.75",
        "seed": None, "threads": None, "out": None, "out_json": None,
    }, required=("x1", "x2", "y", "seed"))
    dataset = _load_dataset(opt)
    report = run_cv(
        dataset, _forest_params(opt), int(opt["k1"]), int(opt["k2"]),
        pmp_grid=_parse_float_list(opt["pmp"]), seed=int(opt["seed"]),
        n_threads=opt["threads"], dataset_name=str(Path(opt["y"]).name))
    _write_reports(opt, report.to_tsv(), report.to_doc())
    return 0


def cmd_sweep_leaf(args, parser) -> int:
    opt = _merge_options(args, parser, {
        **_MODEL_DEFAULTS,
        "x1": None, "x2": None, "y": None,
        "dims": "2x2,5x5,10x10", "variants": "rls_kron,mean",
        "metric": "AUPRC", "k1": 2, "k2": 2,
        "seed": None, "threads": None, "out": None, "out_json": None,
    }, required=("x1", "x2", "y", "seed"))
    dataset = _load_dataset(opt)
    variants = opt["variants"]
    if isinstance(variants, str):
        variants = [v.strip() for v in variants.split(",") if v.strip()]
    report = leaf_size_sweep(
        dataset, _parse_dims(opt["dims"]), variants, _forest_params(opt),
        seed=int(opt["seed"]), metric=opt["metric"],
        k1=int(opt["k1"]), k2=int(opt["k2"]), n_threads=opt["threads"],
        dataset_name=str(Path(opt["y"]).name))
    _write_reports(opt, report.to_tsv(), report.to_doc())
    return 0


def cmd_sweep_trees(args, parser) -> int:
    opt = _merge_options(args, parser, {
        **_MODEL_DEFAULTS,
        "x1": None, "x2": None, "y": None,
        "repeats": 50, "target": 0.98, "metric": "AUPRC",
        "seed": None, "threads": None, "out_json": None,
    }, required=("x1", "x2", "y", "seed"))
    if opt["metric"] not in METRICS:
        raise UsageError(f"unknown metric {opt['metric']!r}")
    dataset = _load_dataset(opt)
    seed = int(opt["seed"])
    split = stratified_kfold(dataset, 2, 2, Rng(seed))[0]
    carved = carve_split(dataset, split)
    train = BipartiteDataset(carved.x1_train, carved.x2_train,
                             carved.y_learn,
                             similarity_features=dataset.similarity_features)
    forest = fit_forest(train, _forest_params(opt), derive_seed(seed, 1),
                        n_threads=opt["threads"])
    scores = forest_tree_scores(forest, carved.x1_test, carved.x2_test)
    estimate = tree_count_bootstrap(
        scores, carved.y_tt.ravel(), Rng(derive_seed(seed, 2)),
        target=float(opt["target"]), repeats=int(opt["repeats"]),
        metric=METRICS[opt["metric"]])
    print(f"expected_trees\t{estimate:.3f}")
    if opt.get("out_json"):
        doc = {"expected_trees": estimate, "n_trees": forest.n_trees,
               "target": float(opt["target"]),
               "repeats": int(opt["repeats"]), "metric": opt["metric"],
               "seed": seed}
        Path(opt["out_json"]).write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n",
            encoding="utf-8")
    return 0


def cmd_bench(args, parser) -> int:
    opt = _merge_options(args, parser, {
        "kind": "build", "sizes": "64,128,256",
        "test_sizes": "512", "repeats": 3,
        "seed": None, "out": None, "out_json": None,
    }, required=("seed",))
    sizes = _parse_int_list(opt["sizes"])
    repeats = int(opt["repeats"])
    seed = int(opt["seed"])
    kind = opt["kind"]
    if kind == "build":
        result = bench_build(sizes, repeats=repeats, seed=seed)
    elif kind == "inference":
        result = bench_inference(sizes, _parse_int_list(opt["test_sizes"]),
                                 repeats=repeats, seed=seed)
    elif kind == "backends":
        result = bench_backends(sizes, repeats=repeats, seed=seed)
    else:
        raise UsageError(f"unknown bench kind {kind!r}")
    _write_reports(opt, result.to_tsv(), result.to_doc())
    return 0


def cmd_gen(args, parser) -> int:
    opt = _merge_options(args, parser, {
        "n1": None, "n2": None, "m1": None, "m2": None,
        "density": 0.5, "seed": None,
        "out_x1": None, "out_x2": None, "out_y": None,
    }, required=("n1", "n2", "m1", "m2", "seed",
                 "out_x1", "out_x2", "out_y"))
    ds = gen_synthetic(int(opt["n1"]), int(opt["n2"]), int(opt["m1"]),
                       int(opt["m2"]), float(opt["density"]),
                       int(opt["seed"]))
    save_matrix(opt["out_x1"], ds.x1)
    save_matrix(opt["out_x2"], ds.x2)
    save_matrix(opt["out_y"], ds.y)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="oxyforest",
                     description="biclustering model tree forests")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="JSON file of options; flags win")
        p.add_argument("--seed", type=int, help="RNG seed (required)")
        p.add_argument("--threads", type=int,
                       help="worker threads (default OXYFOREST_THREADS or 1)")

    p = sub.add_parser("fit", help="train a forest and write the model")
    common(p)
    p.add_argument("--x1", help="row-domain feature matrix")
    p.add_argument("--x2", help="column-domain feature matrix")
    p.add_argument("--y", help="binary interaction matrix")
    p.add_argument("--out", help="model output path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit, subparser=p)

    p = sub.add_parser("predict", help="score a test grid with a model")
    p.add_argument("--config", help="JSON file of options; flags win")
    p.add_argument("--model", help="model file from fit")
    p.add_argument("--x1", help="row-domain test features")
    p.add_argument("--x2", help="column-domain test features")
    p.add_argument("--out", help="score matrix output path")
    p.add_argument("--first-k", dest="first_k", type=int,
                   help="average only the first k trees")
    p.set_defaults(func=cmd_predict, subparser=p)

    p = sub.add_parser("cv", help="cross-validated evaluation report")
    common(p)
    p.add_argument("--x1")
    p.add_argument("--x2")
    p.add_argument("--y")
    p.add_argument("--k1", type=int, help="row folds (default 2)")
    p.add_argument("--k2", type=int, help="column folds (default 2)")
    p.add_argument("--pmp", help="masking grid (default 0,0.25,0.5,0.75)")
    p.add_argument("--out", help="TSV report path (default stdout)")
    p.add_argument("--out-json", dest="out_json", help="JSON report path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_cv, subparser=p)

    p = sub.add_parser("sweep-leaf",
                       help="score leaf-model variants over minimum "
                       "leaf dimensions")
    common(p)
    p.add_argument("--x1")
    p.add_argument("--x2")
    p.add_argument("--y")
    p.add_argument("--dims", help="grid like 2x2,5x5,10x10")
    p.add_argument("--variants", help="leaf models, e.g. rls_kron,mean")
    p.add_argument("--metric", choices=sorted(METRICS))
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--out", help="TSV report path (default stdout)")
    p.add_argument("--out-json", dest="out_json", help="JSON report path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep_leaf, subparser=p)

    p = sub.add_parser("sweep-trees",
                       help="expected trees to reach a fraction of the "
                       "full-ensemble score")
    common(p)
    p.add_argument("--x1")
    p.add_argument("--x2")
    p.add_argument("--y")
    p.add_argument("--repeats", type=int, help="tree orders (default 50)")
    p.add_argument("--target", type=float,
                   help="fraction of the final score (default 0.98)")
    p.add_argument("--metric", choices=sorted(METRICS))
    p.add_argument("--out-json", dest="out_json", help="JSON output path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep_trees, subparser=p)

    p = sub.add_parser("bench", help="timing experiments")
    common(p)
    p.add_argument("--kind", choices=["build", "inference", "backends"],
                   help="experiment (default build)")
    p.add_argument("--sizes", help="size grid (default 64,128,256)")
    p.add_argument("--test-sizes", dest="test_sizes",
                   help="test grid for inference (default 512)")
    p.add_argument("--repeats", type=int, help="timed runs (default 3)")
    p.add_argument("--out", help="TSV output path (default stdout)")
    p.add_argument("--out-json", dest="out_json", help="JSON output path")
    p.set_defaults(func=cmd_bench, subparser=p)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--config", help="JSON file of options; flags win")
    p.add_argument("--seed", type=int, help="RNG seed (required)")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--m1", type=int)
    p.add_argument("--m2", type=int)
    p.add_argument("--density", type=float, help="positive rate (default 0.5)")
    p.add_argument("--out-x1", dest="out_x1")
    p.add_argument("--out-x2", dest="out_x2")
    p.add_argument("--out-y", dest="out_y")
    p.set_defaults(func=cmd_gen, subparser=p)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args, getattr(args, "subparser", parser))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OxyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
