from __future__ import annotations

import numpy as np
import pytest

from dcaplm import _kernels_py, kernels
from dcaplm.data import Dataset, Partition
from dcaplm.spline_basis import AffineMap, SplineConfig

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    if request.param == "python":
        monkeypatch.setattr(kernels, "_impl", _kernels_py)
    return request.param


def unit_config(K=2, degree=3, interior_knots=5):
    maps = tuple(AffineMap(-1.0, 2.0, f"z{k + 1}") for k in range(K))
    return SplineConfig(degree, interior_knots, maps)


def make_partition(n=300, d=1, K=2, seed=0, beta=None, sigma=1.0, group_id=1, intercept=True):
    gen = np.random.default_rng(seed)
    Z = gen.uniform(-1, 1, size=(n, K))
    X = gen.standard_normal((n, d)) + 0.3 * Z[:, :1]
    if intercept:
        X = np.column_stack([X, np.ones(n)])
    beta = np.arange(1, X.shape[1] + 1, dtype=float) if beta is None else np.asarray(beta, float)
    g = np.sin(np.pi * Z[:, 0]) + (Z[:, 1] ** 2 if K > 1 else 0.0)
    Y = X @ beta + g + sigma * gen.standard_normal(n)
    return Partition(group_id, Y, X, Z)


def make_dataset(s=4, n=200, seed=0, **kw):
    parts = [make_partition(n=n, seed=seed + j, group_id=j + 1, **kw) for j in range(s)]
    return Dataset.from_partitions(parts)
