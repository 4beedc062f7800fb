"""Pure numpy implementations of the hot kernels.

These are the reference semantics for ``_kernels.pyx`` and are used whenever
the compiled extension is unavailable (or disabled through the
``DCAPLM_PURE_PYTHON`` environment variable).
"""
from __future__ import annotations

import numpy as np


def _find_span(z: np.ndarray, knots: np.ndarray, degree: int, n_basis: int) -> np.ndarray:
    span = np.searchsorted(knots, z, side="right") - 1
    return np.clip(span, degree, n_basis - 1)


def bspline_design(z, knots, degree: int) -> np.ndarray:
    """Dense matrix of raw B-spline values.

    Uses the triangular (de Boor) recursion on the knot span containing each
    point, which yields the ``degree + 1`` nonzero basis values directly. The
    last span is closed on the right so that ``z`` equal to the final knot is
    covered.

    Parameters
    ----------
    z : ndarray, shape (n,)
        Evaluation points inside ``[knots[degree], knots[-degree-1]]``.
    knots : ndarray
        Nondecreasing knot vector.
    degree : int
        Polynomial degree.

    Returns
    -------
    ndarray, shape (n, len(knots) - degree - 1)
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    p = int(degree)
    n_basis = knots.shape[0] - p - 1
    if n_basis < 1:
        raise ValueError("knot vector too short for the requested degree")
    n = z.shape[0]
    span = _find_span(z, knots, p, n_basis)

    vals = np.zeros((n, p + 1))
    vals[:, 0] = 1.0
    left = np.zeros((n, p + 1))
    right = np.zeros((n, p + 1))
    for j in range(1, p + 1):
        left[:, j] = z - knots[span + 1 - j]
        right[:, j] = knots[span + j] - z
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved

    out = np.zeros((n, n_basis))
    rows = np.arange(n)
    for r in range(p + 1):
        out[rows, span - p + r] = vals[:, r]
    return out


def group_score_sums(scores, multipliers, offsets) -> np.ndarray:
    """Per-replicate, per-group sums of ``scores[i, l] * multipliers[b, i]``.

    Parameters
    ----------
    scores : ndarray, shape (n, d1)
    multipliers : ndarray, shape (B, n)
    offsets : ndarray of int, shape (s + 1,)
        Group ``j`` owns rows ``offsets[j]:offsets[j + 1]``.

    Returns
    -------
    ndarray, shape (B, s, d1)
    """
    scores = np.asarray(scores, dtype=np.float64)
    multipliers = np.asarray(multipliers, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    if multipliers.shape[1] != scores.shape[0]:
        raise ValueError("multiplier matrix does not match the number of observations")
    if offsets[-1] != scores.shape[0]:
        raise ValueError("group offsets do not cover all observations")
    s = offsets.shape[0] - 1
    out = np.zeros((multipliers.shape[0], s, scores.shape[1]))
    for j in range(s):
        a, b = offsets[j], offsets[j + 1]
        out[:, j, :] = multipliers[:, a:b] @ scores[a:b]
    return out
