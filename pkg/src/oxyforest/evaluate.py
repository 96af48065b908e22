"""Cross-validation experiments over the four test settings, the leaf-size
sweep, and the tree-count bootstrap.

run_cv drives the full grid: for every (row-fold, col-fold) split and
every positives-masking percentage it refits a forest on the masked
learning block and scores the four dyad regions (TD, LT, TL, TT) with
both ranking metrics. Degenerate cells (a region with a single class)
produce flagged null entries rather than invented numbers, so averages
over folds never silently absorb a filler value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import BipartiteDataset, DyadSet, carve_split, mask_positives, \
    stratified_kfold
from .ensemble import ForestParams, OxyForest, fit_forest, tree_scores
from .errors import UndefinedMetricError, UsageError
from .metrics import auprc, auroc
from .rng import Rng, derive_seed

SETTINGS = ("TD", "LT", "TL", "TT")
METRICS = {"AUROC": auroc, "AUPRC": auprc}

DEFAULT_PMP_GRID = (0.0, 0.25, 0.5, 0.75)


@dataclass(frozen=True)
class ReportEntry:
    """One measurement; value None means the metric was undefined on this
    cell and note says why."""

    setting: str
    fold: tuple[int, int]
    pmp: float
    metric: str
    value: float | None
    note: str = ""


@dataclass
class EvaluationReport:
    entries: list[ReportEntry] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def _key(self, entry: ReportEntry):
        return (entry.setting, entry.fold, entry.pmp, entry.metric)

    def add(self, entry: ReportEntry) -> None:
        if entry.setting not in SETTINGS:
            raise UsageError(f"unknown setting {entry.setting!r}")
        if entry.metric not in METRICS:
            raise UsageError(f"unknown metric {entry.metric!r}")
        key = self._key(entry)
        if any(self._key(e) == key for e in self.entries):
            raise UsageError(f"duplicate report entry for {key}")
        self.entries.append(entry)

    def defined(self, setting: str | None = None, metric: str | None = None,
                pmp: float | None = None) -> list[ReportEntry]:
        out = []
        for e in self.entries:
            if e.value is None:
                continue
            if setting is not None and e.setting != setting:
                continue
            if metric is not None and e.metric != metric:
                continue
            if pmp is not None and e.pmp != pmp:
                continue
            out.append(e)
        return out

    def mean_value(self, setting: str, metric: str,
                   pmp: float | None = None) -> float | None:
        """Mean over the defined entries of one setting, None if all cells
        were degenerate."""
        vals = [e.value for e in self.defined(setting, metric, pmp)]
        return float(np.mean(vals)) if vals else None

    def semi_inductive_mean(self, metric: str,
                            pmp: float | None = None) -> float | None:
        """Mean over the defined LT and TL entries pooled together."""
        vals = [e.value
                for s in ("LT", "TL")
                for e in self.defined(s, metric, pmp)]
        return float(np.mean(vals)) if vals else None

    def to_tsv(self) -> str:
        lines = ["setting\tfold\tpmp\tmetric\tvalue"]
        for e in self.entries:
            value = "NA" if e.value is None else f"{e.value:.17g}"
            lines.append(
                f"{e.setting}\t{e.fold[0]}-{e.fold[1]}\t{e.pmp:g}\t"
                f"{e.metric}\t{value}")
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {
            "metadata": self.metadata,
            "entries": [
                {"setting": e.setting, "fold": list(e.fold), "pmp": e.pmp,
                 "metric": e.metric, "value": e.value, "note": e.note}
                for e in self.entries
            ],
        }


def _add_measured(report: EvaluationReport, setting: str, fold, pmp: float,
                  scores: np.ndarray, labels: np.ndarray) -> None:
    for name, fn in METRICS.items():
        try:
            value, note = fn(scores, labels), ""
        except UndefinedMetricError as exc:
            value, note = None, str(exc)
        report.add(ReportEntry(setting, fold, pmp, name, value, note))


def _add_undefined(report: EvaluationReport, setting: str, fold, pmp: float,
                   reason: str) -> None:
    for name in METRICS:
        report.add(ReportEntry(setting, fold, pmp, name, None, reason))


def run_cv(dataset: BipartiteDataset, params: ForestParams, k1: int, k2: int,
           pmp_grid=DEFAULT_PMP_GRID, seed: int = 0,
           n_threads: int | None = None,
           dataset_name: str = "") -> EvaluationReport:
    """Fit and score a forest for every (split, pmp) cell.

    Every cell's masking and forest seeds derive from (seed, cell index),
    so any subset of cells can be recomputed independently and reproduce
    the full run's numbers.
    """
    pmp_grid = tuple(float(p) for p in pmp_grid)
    if len(pmp_grid) == 0:
        raise UsageError("pmp grid is empty")
    if len(set(pmp_grid)) != len(pmp_grid):
        raise UsageError(f"pmp grid has duplicates: {pmp_grid}")
    for p in pmp_grid:
        if not 0.0 <= p < 1.0:
            raise UsageError(f"pmp must be in [0, 1), got {p}")
    report = EvaluationReport(metadata={
        "dataset": dataset_name,
        "n1": dataset.n1, "n2": dataset.n2,
        "k1": k1, "k2": k2, "pmp_grid": list(pmp_grid),
        "seed": int(seed), "params": params.to_doc(),
    })
    splits = stratified_kfold(dataset, k1, k2, Rng(seed))
    cell = 0
    for split in splits:
        for pmp in pmp_grid:
            cell_seed = derive_seed(seed, cell)
            cell += 1
            masked, _, _ = mask_positives(
                dataset, split, pmp, Rng(derive_seed(cell_seed, 0)))
            carved = carve_split(dataset, masked)
            train = BipartiteDataset(
                carved.x1_train, carved.x2_train, carved.y_learn,
                similarity_features=dataset.similarity_features)
            forest = fit_forest(train, params, derive_seed(cell_seed, 1),
                                n_threads)
            fold = split.fold
            td = carved.eval_td
            if td.labels.sum() == 0:
                reason = "no masked positives" + \
                    (" at pmp=0" if pmp == 0.0 else "")
                _add_undefined(report, "TD", fold, pmp, reason)
            else:
                ld_scores = forest.predict(carved.x1_train, carved.x2_train)
                _add_measured(report, "TD", fold, pmp,
                              ld_scores[td.rows, td.cols], td.labels)
            _add_measured(report, "LT", fold, pmp,
                          forest.predict(carved.x1_train, carved.x2_test),
                          carved.y_lt)
            _add_measured(report, "TL", fold, pmp,
                          forest.predict(carved.x1_test, carved.x2_train),
                          carved.y_tl)
            _add_measured(report, "TT", fold, pmp,
                          forest.predict(carved.x1_test, carved.x2_test),
                          carved.y_tt)
    return report


@dataclass(frozen=True)
class SweepRow:
    variant: str
    min_rows: int
    min_cols: int
    score: float | None
    relative: float | None


@dataclass
class LeafSweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["variant\tmin_rows\tmin_cols\tscore\trelative"]
        for r in self.rows:
            score = "NA" if r.score is None else f"{r.score:.17g}"
            rel = "NA" if r.relative is None else f"{r.relative:.17g}"
            lines.append(
                f"{r.variant}\t{r.min_rows}\t{r.min_cols}\t{score}\t{rel}")
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {
            "metadata": self.metadata,
            "rows": [
                {"variant": r.variant, "min_rows": r.min_rows,
                 "min_cols": r.min_cols, "score": r.score,
                 "relative": r.relative}
                for r in self.rows
            ],
        }


def leaf_size_sweep(dataset: BipartiteDataset, dims_grid, variants,
                    params: ForestParams, seed: int, metric: str = "AUPRC",
                    k1: int = 2, k2: int = 2,
                    n_threads: int | None = None,
                    dataset_name: str = "") -> LeafSweepReport:
    """Score each leaf-model variant across minimum-leaf-dimension settings,
    reporting each score relative to that variant's 2x2 score.

    The 2x2 baseline is always fit, whether or not (2, 2) is in the grid;
    scores are mean TT metric over an unmasked k1 x k2 cross-validation.
    """
    dims = [(int(a), int(b)) for a, b in dims_grid]
    if not dims:
        raise UsageError("leaf-size grid is empty")
    if metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}")
    variants = tuple(variants)
    if not variants:
        raise UsageError("no model variants given")
    report = LeafSweepReport(metadata={
        "dataset": dataset_name, "metric": metric,
        "k1": k1, "k2": k2, "seed": int(seed),
        "dims": [list(d) for d in dims], "variants": list(variants),
        "params": params.to_doc(),
    })
    run_index = 0
    for variant in variants:
        plan = [(2, 2)] + [d for d in dims if d != (2, 2)]
        scores: dict[tuple[int, int], float | None] = {}
        for mr, mc in plan:
            run_seed = derive_seed(seed, run_index)
            run_index += 1
            vparams = replace(params, tree=replace(
                params.tree, min_rows=mr, min_cols=mc, leaf_model=variant))
            cv = run_cv(dataset, vparams, k1, k2, pmp_grid=(0.0,),
                        seed=run_seed, n_threads=n_threads,
                        dataset_name=dataset_name)
            scores[(mr, mc)] = cv.mean_value("TT", metric, pmp=0.0)
        base = scores[(2, 2)]
        for d in dims:
            score = scores[d]
            relative = None
            if score is not None and base is not None and base != 0.0:
                relative = score / base
            report.rows.append(SweepRow(variant, d[0], d[1], score, relative))
    return report


def first_count_reaching(curve, target_value: float) -> float:
    """First (fractional) prefix length at which the curve reaches the
    target value.

    The curve is indexed from one tree. Interior crossings are linearly
    interpolated; a curve that first reaches the target at its final
    point returns the endpoint count, since the target is defined by that
    final score; a curve that never reaches it also returns the endpoint.
    """
    m = np.asarray(curve, dtype=np.float64).ravel()
    total = m.shape[0]
    if total == 0:
        raise UsageError("empty curve")
    if m[0] >= target_value:
        return 1.0
    for k in range(2, total + 1):
        if m[k - 1] >= target_value:
            if k == total:
                return float(total)
            prev, here = m[k - 2], m[k - 1]
            return (k - 1) + (target_value - prev) / (here - prev)
    return float(total)


def tree_count_bootstrap(per_tree_scores, labels, rng: Rng,
                         target: float = 0.98, repeats: int = 50,
                         metric=auroc) -> float:
    """Expected number of trees needed to reach target x (score of the
    full ensemble), averaged over random tree orders.

    per_tree_scores is (n_trees, ...) with one score set per tree; prefix
    means over a shuffled tree order give a metric-vs-count curve whose
    crossing is interpolated by first_count_reaching.
    """
    scores = np.asarray(per_tree_scores, dtype=np.float64)
    if scores.ndim < 2:
        raise UsageError("per_tree_scores must be (n_trees, ...) stacked")
    total = scores.shape[0]
    if total < 2:
        raise UsageError(f"need at least 2 trees, got {total}")
    if repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {repeats}")
    if not target > 0.0:
        raise UsageError(f"target must be positive, got {target}")
    flat = scores.reshape(total, -1)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.shape[0] != flat.shape[1]:
        raise UsageError(
            f"labels length {y.shape[0]} does not match per-tree score "
            f"size {flat.shape[1]}")
    final = metric(flat.mean(axis=0), y)
    tv = target * final
    estimates = np.empty(repeats)
    for r in range(repeats):
        order = rng.permutation(total)
        curve = np.empty(total)
        acc = np.zeros(flat.shape[1])
        for k in range(1, total + 1):
            acc += flat[order[k - 1]]
            curve[k - 1] = metric(acc / k, y)
        estimates[r] = first_count_reaching(curve, tv)
    return float(estimates.mean())


def forest_tree_scores(forest: OxyForest, x1_test, x2_test,
                       dyads: DyadSet | None = None) -> np.ndarray:
    """Stack per-tree scores, optionally gathered at a dyad subset; feeds
    tree_count_bootstrap."""
    stacked = tree_scores(forest, x1_test, x2_test)
    if dyads is None:
        return stacked.reshape(stacked.shape[0], -1)
    return stacked[:, dyads.rows, dyads.cols]
