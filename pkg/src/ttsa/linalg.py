"""Small dense linear-algebra helpers with condition guards."""

from __future__ import annotations

import numpy as np

from ttsa.errors import SingularMatrixError

COND_CAP = 1e12


def guarded_inv(mat: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Dense inverse, rejected when the condition number exceeds 1e12."""
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_CAP:
        raise SingularMatrixError(f"{what} is singular or badly conditioned (cond={cond:.3e})")
    return np.linalg.inv(mat)


def guarded_solve(mat: np.ndarray, rhs: np.ndarray, what: str = "matrix") -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_CAP:
        raise SingularMatrixError(f"{what} is singular or badly conditioned (cond={cond:.3e})")
    return np.linalg.solve(mat, rhs)


def sym_eig_bounds(mat: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalues of the symmetric part of ``mat``."""
    sym = 0.5 * (mat + mat.T)
    vals = np.linalg.eigvalsh(sym)
    return float(vals[0]), float(vals[-1])
