"""Dense linear algebra: pivoted LU, symmetric eigenvalues, 2-norms.

LAPACK (through scipy/numpy) does the arithmetic; this module adds the
singularity policy and the input checks the solvers rely on.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

PIVOT_RTOL = 1e-14
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class LuFactors:
    """Combined L\\U storage plus LAPACK pivot indices of a square matrix."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def size(self) -> int:
        return self.lu.shape[0]

    def permutation(self) -> np.ndarray:
        """Row order ``p`` such that ``a[p] == L @ U``."""
        perm = np.arange(self.size)
        for i, j in enumerate(self.piv):
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def lower(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.size)

    def upper(self) -> np.ndarray:
        return np.triu(self.lu)


def lu_factor(a) -> LuFactors:
    """Partial-pivoting LU of a square matrix.

    Raises SingularMatrixError naming the first pivot whose magnitude falls
    below ``1e-14 * ||a||_inf``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"lu_factor needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    norm = np.max(np.sum(np.abs(a), axis=1)) if a.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots < PIVOT_RTOL * norm) if norm > 0 else np.arange(a.shape[0])
    if bad.size:
        raise SingularMatrixError(int(bad[0]))
    return LuFactors(lu, piv)


def lu_solve(f: LuFactors, b) -> np.ndarray:
    """Solve ``a x = b`` for a vector or a matrix of right-hand-side columns."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.size:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, factors have size {f.size}")
    return scipy.linalg.lu_solve((f.lu, f.piv), b, check_finite=False)


def sym_eigs(h, vectors: bool = False):
    """Ascending eigenvalues (and optionally eigenvectors) of a symmetric matrix."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("sym_eigs needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    asym = float(np.max(np.abs(h - h.T))) if h.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max |h - h^T| = {asym:.3e})")
    hs = 0.5 * (h + h.T)
    if vectors:
        return np.linalg.eigh(hs)
    return np.linalg.eigvalsh(hs)


def two_norm(a) -> float:
    """Largest singular value, from the spectrum of ``a^T a``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    lam = sym_eigs(a.T @ a)
    return float(np.sqrt(max(lam[-1], 0.0)))
