"""Divide-and-conquer estimation and inference for additive partially linear
models on heterogeneous sub-populations.

Each group ``j`` follows ``Y = X' beta_j + sum_k g_k(Z_k) + eps`` with
group-specific linear coefficients and a shared additive function. Groups are
fitted independently by polynomial-spline least squares, the spline parts are
averaged into a common estimate, and each group's coefficients are refitted
against it.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .aggregate import AggregatedFit, aggregate_beta, aggregate_g, boost_beta
from .data import Dataset, Partition
from .divide_conquer import DcResult, fit_divide_and_conquer
from .errors import (
    ConfigError,
    DataError,
    DcaplmError,
    NumericalError,
)
from .hypothesis_tests import (
    TestResult,
    bootstrap_consecutive_test,
    bootstrap_max_test,
    lrt_homogeneity_component,
    lrt_homogeneity_joint,
    wald_pairwise,
)
from .inference import CiResult, ci_beta, pooled_sigma2
from .kernels import BACKEND
from .spline_basis import SplineConfig, center_basis, eval_raw_basis, make_knots
from .subpop import SubPopFit, eval_g, fit_subpop

__all__ = [
    "AggregatedFit", "aggregate_beta", "aggregate_g", "boost_beta",
    "Dataset", "Partition", "DcResult", "fit_divide_and_conquer",
    "ConfigError", "DataError", "DcaplmError", "NumericalError",
    "TestResult", "bootstrap_consecutive_test", "bootstrap_max_test",
    "lrt_homogeneity_component", "lrt_homogeneity_joint", "wald_pairwise",
    "CiResult", "ci_beta", "pooled_sigma2", "BACKEND",
    "SplineConfig", "center_basis", "eval_raw_basis", "make_knots",
    "SubPopFit", "eval_g", "fit_subpop",
]
