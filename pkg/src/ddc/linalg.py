"""Small dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack


def rcond(M: np.ndarray) -> float:
    """Reciprocal 1-norm condition number estimate (0.0 for exactly singular)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    if not np.all(np.isfinite(M)):
        return 0.0
    lu, piv, info = lapack.dgetrf(M)
    if info > 0:
        return 0.0
    anorm = np.linalg.norm(M, 1)
    if anorm == 0.0:
        return 0.0
    rc, info = lapack.dgecon(lu, anorm, norm="1")
    return float(rc)


def lu_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse via pivoted LU solves against the identity."""
    n = M.shape[0]
    return sla.lu_solve(sla.lu_factor(M, check_finite=True), np.eye(n))


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)
