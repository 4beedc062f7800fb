"""Dense least squares and SPD solves.

Least squares goes through a column-pivoted Householder QR (LAPACK ``geqp3``)
rather than the normal equations, which square the condition number of the
spline blocks.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DataError, NotPositiveDefiniteError, SingularDesignError

RANK_TOL = 1e-10


def solve_ls(design, response, rank_tol: float = RANK_TOL, column_names=None) -> np.ndarray:
    """Minimize ``0.5 * ||response - design @ coef||^2``.

    Parameters
    ----------
    design : ndarray, shape (n, p)
    response : ndarray, shape (n,) or (n, r)
        Several right-hand sides share one factorization.
    rank_tol : float
        A pivoted diagonal entry of R below ``rank_tol * |R[0, 0]|`` marks the
        design as rank deficient.
    column_names : sequence of str, optional
        Used only in the error message.

    Returns
    -------
    ndarray, shape (p,) or (p, r)

    Raises
    ------
    SingularDesignError
        Carries ``column``, the index of the first column found to be
        (numerically) dependent on the others.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("design must be a 2-d array")
    n, p = X.shape
    if y.shape[0] != n:
        raise DataError(f"response has {y.shape[0]} rows, design has {n}")
    if n < p:
        raise SingularDesignError(f"{n} observations cannot identify {p} coefficients", column=n)
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DataError("design and response must be finite")
    if p == 0:
        return np.zeros((0,) + y.shape[1:])

    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    small = diag < rank_tol * diag[0] if diag[0] > 0 else np.ones(p, dtype=bool)
    if small.any():
        col = int(piv[int(np.argmax(small))])
        label = f"{col} ({column_names[col]})" if column_names is not None else str(col)
        raise SingularDesignError(f"design is rank deficient at column {label}", column=col)

    z = Q.T @ y
    sol = scipy.linalg.solve_triangular(R, z, lower=False)
    coef = np.empty_like(sol)
    coef[piv] = sol
    return coef


def solve_symmetric(matrix, rhs) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` for symmetric positive definite ``matrix`` (Cholesky)."""
    A = np.asarray(matrix, dtype=np.float64)
    b = np.asarray(rhs, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * max(1.0, float(np.abs(A).max(initial=0.0)))):
        raise NotPositiveDefiniteError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    return scipy.linalg.cho_solve(factor, b)


def inv_symmetric(matrix) -> np.ndarray:
    A = np.asarray(matrix, dtype=np.float64)
    return solve_symmetric(A, np.eye(A.shape[0]))
