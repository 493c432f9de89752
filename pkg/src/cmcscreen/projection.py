"""Residualising candidates against the conditional set.

The basis spans the columns of ``[1 | X_S]``; the intercept is included so that
residuals are mean-zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from cmcscreen.errors import DegenerateDataError


@dataclass(frozen=True, eq=False)
class ProjectionBasis:
    q: np.ndarray  # n x rank, orthonormal columns
    tolerance: float

    @property
    def rank(self) -> int:
        return self.q.shape[1]


def build_basis(x_s, tol: float = 1e-10) -> ProjectionBasis:
    """Orthonormal basis of span([1 | x_s]) via pivoted QR.

    Columns whose pivot is below ``tol`` times the largest pivot are dropped.
    """
    x_s = np.asarray(x_s, dtype=float)
    if x_s.ndim == 1:
        x_s = x_s[:, None]
    n, d1 = x_s.shape
    if n <= d1 + 1:
        raise DegenerateDataError(f"projection needs n > d1 + 1 (n = {n}, d1 = {d1})")
    if not np.all(np.isfinite(x_s)):
        raise ValueError("conditional block has non-finite entries")
    m = np.column_stack([np.ones(n), x_s])
    q, r, _ = scipy.linalg.qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * diag[0]))
    q = np.ascontiguousarray(q[:, :rank])
    q.flags.writeable = False
    return ProjectionBasis(q, tol)


def residualize(basis: ProjectionBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.q.shape[0],):
        raise ValueError(f"length mismatch: {x.shape} vs basis with n = {basis.q.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite candidate")
    return x - basis.q @ (basis.q.T @ x)
