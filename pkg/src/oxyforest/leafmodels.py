"""Leaf prediction models: constant mean and Kronecker-kernel ridge.

The ridge model solves (K + alpha I) c = vec(Y_leaf) where K is the
Kronecker product of a row-domain and a column-domain kernel, using two
small eigendecompositions instead of the (n1 n2)^2 dense system:

    C = U1 [ L (.) (U1' Y U2) ] U2',   L_ij = 1 / (alpha + l1_i l2_j)
    scores = Phi1_test C Phi2_test'

in the row-domain x column-domain orientation used everywhere in this
package. rls_kron_oracle solves the dense system directly and exists only
to pin the closed form down in tests.

Similarity inputs need not be PSD: kernels are symmetrized and negative
eigenvalues clamped to zero, so every denominator is at least alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError, UsageError
from .linalg import as_matrix, sym_eigen

# denominators smaller than this mean alpha was effectively zero
_SINGULAR_TOL = 1e-12

_ORACLE_CAP = 400

_MODES = ("precomputed", "linear", "rbf")


@dataclass(frozen=True)
class KernelConfig:
    """Similarity function for one domain.

    precomputed: features are similarities indexed by training instances;
    linear: dot products; rbf: exp(-gamma ||a - b||^2).
    """

    mode: str = "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise UsageError(
                f"unknown kernel mode {self.mode!r}; choose one of {_MODES}")
        if self.mode == "rbf":
            if self.gamma is None or not np.isfinite(self.gamma) \
                    or self.gamma <= 0:
                raise UsageError(
                    f"rbf kernel needs a positive finite gamma, "
                    f"got {self.gamma}")
        elif self.gamma is not None:
            raise UsageError(f"gamma is only valid for rbf, not {self.mode}")

    def to_doc(self) -> dict:
        doc = {"mode": self.mode}
        if self.mode == "rbf":
            doc["gamma"] = float(self.gamma)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "KernelConfig":
        return cls(mode=doc["mode"], gamma=doc.get("gamma"))


def kernel_matrix(config: KernelConfig, a, b=None, b_ids=None) -> np.ndarray:
    """Similarities between the rows of `a` and the rows of `b`.

    In precomputed mode `a` already holds similarities to training
    instances, so the result is the column selection a[:, b_ids] and `b`
    is ignored.
    """
    a = as_matrix(a, "a")
    if config.mode == "precomputed":
        if b_ids is None:
            raise UsageError("precomputed kernel needs b_ids")
        ids = np.asarray(b_ids, dtype=np.int64)
        if ids.size > 0 and (ids.min() < 0 or ids.max() >= a.shape[1]):
            raise UsageError(
                f"precomputed kernel index out of range: features have "
                f"{a.shape[1]} columns")
        return a[:, ids].copy()
    if b is None:
        raise UsageError(f"{config.mode} kernel needs feature matrix b")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise UsageError(
            f"kernel feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    if config.mode == "linear":
        return a @ b.T
    sq = (
        (a * a).sum(axis=1)[:, None]
        - 2.0 * (a @ b.T)
        + (b * b).sum(axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-config.gamma * sq)


@dataclass(frozen=True)
class MeanLeaf:
    """Constant prediction: the mean label of the leaf's training block."""

    value: float

    def predict(self, t1: int, t2: int) -> np.ndarray:
        return np.full((t1, t2), self.value)

    def to_doc(self) -> dict:
        return {"kind": "mean", "value": float(self.value)}


def mean_fit(y_leaf) -> MeanLeaf:
    y = as_matrix(y_leaf, "y_leaf")
    if y.size == 0:
        raise UsageError("mean_fit needs a nonempty block")
    return MeanLeaf(float(y.mean()))


@dataclass(frozen=True)
class RlsKronLeaf:
    """Kronecker ridge coefficients plus the leaf's training context.

    rows/cols index the training set the tree was fit on; alongside the
    kernel configs they let prediction rebuild the test-vs-leaf kernel
    blocks. mean is kept as a degenerate-case reference value.
    """

    w: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    alpha: float
    kernel1: KernelConfig
    kernel2: KernelConfig
    mean: float

    def predict(self, phi1_test: np.ndarray,
                phi2_test: np.ndarray) -> np.ndarray:
        if phi1_test.shape[1] != self.w.shape[0] \
                or phi2_test.shape[1] != self.w.shape[1]:
            raise UsageError(
                f"test kernel widths ({phi1_test.shape[1]}, "
                f"{phi2_test.shape[1]}) do not match leaf size "
                f"{self.w.shape}")
        return phi1_test @ self.w @ phi2_test.T

    def to_doc(self) -> dict:
        return {
            "kind": "rls_kron",
            "alpha": float(self.alpha),
            "w": self.w.tolist(),
            "rows": self.rows.tolist(),
            "cols": self.cols.tolist(),
            "kernel": {"k1": self.kernel1.to_doc(),
                       "k2": self.kernel2.to_doc()},
            "mean": float(self.mean),
        }


def leaf_from_doc(doc: dict):
    kind = doc.get("kind")
    if kind == "mean":
        return MeanLeaf(float(doc["value"]))
    if kind == "rls_kron":
        return RlsKronLeaf(
            w=np.array(doc["w"], dtype=np.float64),
            rows=np.array(doc["rows"], dtype=np.int64),
            cols=np.array(doc["cols"], dtype=np.int64),
            alpha=float(doc["alpha"]),
            kernel1=KernelConfig.from_doc(doc["kernel"]["k1"]),
            kernel2=KernelConfig.from_doc(doc["kernel"]["k2"]),
            mean=float(doc["mean"]),
        )
    raise DataError(f"unknown leaf model kind {kind!r}")


def _clamped_eigen(phi: np.ndarray):
    dec = sym_eigen(phi)
    lam = np.maximum(dec.eigenvalues, 0.0)
    return lam, dec.eigenvectors


def rls_kron_fit(phi1, phi2, y_leaf, alpha: float,
                 rows=None, cols=None,
                 kernel1: KernelConfig | None = None,
                 kernel2: KernelConfig | None = None) -> RlsKronLeaf:
    """Closed-form Kronecker ridge fit from the two leaf kernels."""
    phi1 = as_matrix(phi1, "phi1")
    phi2 = as_matrix(phi2, "phi2")
    y = as_matrix(y_leaf, "y_leaf")
    if alpha <= 0 or not np.isfinite(alpha):
        raise UsageError(f"alpha must be positive, got {alpha}")
    if y.shape != (phi1.shape[0], phi2.shape[0]):
        raise UsageError(
            f"y_leaf shape {y.shape} does not match kernel sizes "
            f"({phi1.shape[0]}, {phi2.shape[0]})")
    lam1, u1 = _clamped_eigen(phi1)
    lam2, u2 = _clamped_eigen(phi2)
    denom = alpha + np.outer(lam1, lam2)
    if np.abs(denom).min() < _SINGULAR_TOL:
        raise NumericError(
            f"singular ridge denominator: alpha = {alpha} is too small "
            f"for the leaf kernel spectrum")
    w = u1 @ ((u1.T @ y @ u2) / denom) @ u2.T
    if rows is None:
        rows = np.arange(phi1.shape[0], dtype=np.int64)
    if cols is None:
        cols = np.arange(phi2.shape[0], dtype=np.int64)
    return RlsKronLeaf(
        w=w,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        alpha=float(alpha),
        kernel1=kernel1 or KernelConfig(mode="linear"),
        kernel2=kernel2 or KernelConfig(mode="linear"),
        mean=float(y.mean()),
    )


def rls_kron_predict(leaf: RlsKronLeaf, phi1_test, phi2_test) -> np.ndarray:
    return leaf.predict(as_matrix(phi1_test, "phi1_test"),
                        as_matrix(phi2_test, "phi2_test"))


def rls_kron_oracle(phi1, phi2, y_leaf, alpha: float,
                    phi1_test, phi2_test) -> np.ndarray:
    """Dense Kronecker ridge solve; correctness oracle for small leaves."""
    phi1 = as_matrix(phi1, "phi1")
    phi2 = as_matrix(phi2, "phi2")
    y = as_matrix(y_leaf, "y_leaf")
    n1, n2 = y.shape
    if n1 * n2 > _ORACLE_CAP:
        raise UsageError(
            f"oracle size cap exceeded: {n1}x{n2} = {n1 * n2} > {_ORACLE_CAP}")
    big = np.kron(phi1, phi2) + alpha * np.eye(n1 * n2)
    coef = np.linalg.solve(big, y.reshape(-1)).reshape(n1, n2)
    p1t = as_matrix(phi1_test, "phi1_test")
    p2t = as_matrix(phi2_test, "phi2_test")
    return p1t @ coef @ p2t.T
