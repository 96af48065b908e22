"""Dense matrix helpers and the symmetric eigendecomposition.

Matrices are plain float64 ndarrays. The eigensolver is cyclic Jacobi
(kernel implementations live in the backend modules); leaf kernels are
small enough that its simplicity beats a tuned LAPACK call, and it keeps
the package's numerics self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import NumericError, UsageError

JACOBI_TOL_FACTOR = 1e-12
JACOBI_MAX_SWEEPS = 100

# relative asymmetry tolerated before sym_eigen refuses the input
_ASYM_TOL = 1e-9


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a 2-d float64 array."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise UsageError(f"{name} must be 2-dimensional, got ndim={out.ndim}")
    if not np.isfinite(out).all():
        raise UsageError(f"{name} contains non-finite values")
    return out


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise UsageError(
            f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


@dataclass(frozen=True)
class SymmetricEigen:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def sym_eigen(a) -> SymmetricEigen:
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.

    The input is symmetrized as (A + A.T)/2 first; asymmetry beyond
    1e-9 times the largest magnitude entry is rejected.
    """
    a = as_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise UsageError(f"sym_eigen needs a square matrix, got {a.shape}")
    if n == 0:
        return SymmetricEigen(np.empty(0), np.empty((0, 0)))
    scale = np.abs(a).max()
    asym = np.abs(a - a.T).max()
    if asym > _ASYM_TOL * max(scale, 1e-300):
        raise UsageError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} "
            f"exceeds {_ASYM_TOL:.0e} x max|a|")
    sym = symmetrize(a)
    kern = backend.kernels()
    w, v, converged, sweeps = kern.jacobi_eigh(
        sym, JACOBI_TOL_FACTOR, JACOBI_MAX_SWEEPS)
    if not converged:
        raise NumericError(
            f"Jacobi eigensolver did not converge on a {n}x{n} matrix "
            f"after {sweeps} sweeps")
    order = np.argsort(-w, kind="stable")
    return SymmetricEigen(w[order].copy(), v[:, order].copy())
