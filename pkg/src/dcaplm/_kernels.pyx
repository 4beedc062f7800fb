# cython: language_level=3
"""Compiled kernels: B-spline design evaluation and grouped multiplier sums.

Same semantics as ``_kernels_py``; see that module for the reference
implementation. The grouped sums go through scipy's BLAS.
"""
import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline Py_ssize_t _find_span(const double[::1] knots, Py_ssize_t degree,
                                  Py_ssize_t n_basis, double z) noexcept nogil:
    # largest i in [degree, n_basis - 1] with knots[i] <= z; right end closed
    cdef Py_ssize_t lo = degree, hi = n_basis, mid
    if z >= knots[n_basis]:
        return n_basis - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots[mid] <= z:
            lo = mid
        else:
            hi = mid
    return lo


def bspline_design(const double[::1] z, const double[::1] knots, int degree):
    """Dense (n, len(knots) - degree - 1) matrix of raw B-spline values at ``z``."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t p = degree
    cdef Py_ssize_t n_basis = knots.shape[0] - p - 1
    if n_basis < 1:
        raise ValueError("knot vector too short for the requested degree")
    out_arr = np.zeros((n, n_basis), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double *vals = <double *> malloc((p + 1) * sizeof(double))
    cdef double *left = <double *> malloc((p + 1) * sizeof(double))
    cdef double *right = <double *> malloc((p + 1) * sizeof(double))
    cdef Py_ssize_t row, span, j, r
    cdef double saved, temp, u
    if vals == NULL or left == NULL or right == NULL:
        free(vals)
        free(left)
        free(right)
        raise MemoryError()
    try:
        with nogil:
            for row in range(n):
                u = z[row]
                span = _find_span(knots, p, n_basis, u)
                vals[0] = 1.0
                for j in range(1, p + 1):
                    left[j] = u - knots[span + 1 - j]
                    right[j] = knots[span + j] - u
                    saved = 0.0
                    for r in range(j):
                        temp = vals[r] / (right[r + 1] + left[j - r])
                        vals[r] = saved + right[r + 1] * temp
                        saved = left[j - r] * temp
                    vals[j] = saved
                for r in range(p + 1):
                    out[row, span - p + r] = vals[r]
    finally:
        free(vals)
        free(left)
        free(right)
    return out_arr


def group_score_sums(const double[:, ::1] scores, const double[:, ::1] multipliers,
                     const long long[::1] offsets):
    """Per-replicate, per-group sums ``sum_{i in group j} scores[i, l] * multipliers[b, i]``.

    One BLAS ``dgemm`` per group writes the (B, d1) block in place. Returns an
    array of shape (B, s, d1).
    """
    cdef Py_ssize_t n_rep = multipliers.shape[0]
    cdef Py_ssize_t n_obs = scores.shape[0]
    cdef Py_ssize_t d1 = scores.shape[1]
    cdef Py_ssize_t s = offsets.shape[0] - 1
    if multipliers.shape[1] != n_obs:
        raise ValueError("multiplier matrix does not match the number of observations")
    if offsets[s] != n_obs:
        raise ValueError("group offsets do not cover all observations")
    out_arr = np.zeros((n_rep, s, d1), dtype=np.float64)
    if n_rep == 0 or d1 == 0:
        return out_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t j, a
    cdef int m, n_d1 = <int>d1, n_b = <int>n_rep, lda = <int>d1
    cdef int ldb = <int>n_obs, ldc = <int>(s * d1)
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'N'
    # row-major (B x m) @ (m x d1) is column-major (d1 x m) @ (m x B)
    with nogil:
        for j in range(s):
            a = offsets[j]
            m = <int>(offsets[j + 1] - a)
            if m == 0:
                continue
            dgemm(&trans, &trans, &n_d1, &n_b, &m, &one, <double*>&scores[a, 0], &lda,
                  <double*>&multipliers[0, a], &ldb, &zero, &out[0, j, 0], &ldc)
    return out_arr
