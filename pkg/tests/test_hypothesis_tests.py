from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from conftest import make_partition, unit_config
from dcaplm.data import Partition
from dcaplm.errors import ConfigError
from dcaplm.hypothesis_tests import (
    bootstrap_consecutive_test,
    bootstrap_decision,
    bootstrap_max_test,
    chi2_quantile,
    chi2_sf,
    lrt_homogeneity_component,
    lrt_homogeneity_joint,
    multiplier_sums,
    wald_pairwise,
)
from dcaplm.inference import pooled_sigma2
from dcaplm.spline_basis import AffineMap, SplineConfig
from dcaplm.subpop import fit_subpop

# ---------------------------------------------------------------- Wald


def test_wald_equal_coefficients():
    r = wald_pairwise([1.0], [1.0], [[1.0]], [[1 / 12]], 1.0, 100)
    assert r.statistic == 0.0 and not r.reject and r.p_value == 1.0


def test_wald_worked_example():
    r = wald_pairwise([0.679], [0.0], [[1.0]], [[1 / 12]], 1.0, 100)
    assert r.statistic == pytest.approx(10 * 0.679 / math.sqrt(24), rel=1e-12)
    assert r.statistic == pytest.approx(1.386, abs=1e-3)
    assert not r.reject and r.critical_value == pytest.approx(1.959964, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(b1=st.floats(-5, 5), b2=st.floats(-5, 5), c=st.floats(0.01, 100))
def test_wald_symmetry_and_contrast_scale(b1, b2, c):
    base = wald_pairwise([b1], [b2], [[1.0]], [[0.2]], 1.3, 64)
    swapped = wald_pairwise([b2], [b1], [[1.0]], [[0.2]], 1.3, 64)
    scaled = wald_pairwise([b1], [b2], [[c]], [[0.2]], 1.3, 64)
    assert swapped.statistic == pytest.approx(base.statistic, rel=1e-12, abs=1e-12)
    assert scaled.statistic == pytest.approx(base.statistic, rel=1e-9, abs=1e-12)
    assert swapped.reject == base.reject
    assert (base.p_value <= 0.05) == base.reject or abs(base.statistic - base.critical_value) < 1e-9


def test_wald_multivariate_chi_square():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    b1, b2 = np.array([0.4, -0.2]), np.array([0.0, 0.1])
    r = wald_pairwise(b1, b2, np.eye(2), M, 1.5, 50)
    diff = b1 - b2
    V = 2 * 1.5 * np.linalg.inv(M) / 50
    assert r.statistic == pytest.approx(diff @ np.linalg.solve(V, diff), rel=1e-12)
    assert r.critical_value == pytest.approx(chi2.ppf(0.95, 2), rel=1e-10)
    assert r.p_value == pytest.approx(chi2.sf(r.statistic, 2), rel=1e-10)


def test_wald_per_group_matrices():
    r = wald_pairwise([1.0], [0.0], [[1.0]], (np.array([[0.5]]), np.array([[0.25]])), 2.0, (10, 20))
    assert r.statistic == pytest.approx(1.0 / math.sqrt(2.0 * (2.0 / 10 + 4.0 / 20)))


def test_wald_rejects_bad_contrast():
    with pytest.raises(ConfigError):
        wald_pairwise([1.0, 2.0], [0.0, 0.0], [[1.0, 1.0], [2.0, 2.0]], np.eye(2), 1.0, 10)
    with pytest.raises(ConfigError):
        wald_pairwise([1.0], [0.0], [[1.0]], [[1.0]], 1.0, 10, alpha=1.5)

# ---------------------------------------------------------------- chi-square


@pytest.mark.parametrize("dof", [1, 2, 5, 30, 83])
def test_chi2_quantile_integer_dof(dof):
    for p in (0.05, 0.5, 0.95, 0.99):
        assert chi2_quantile(p, dof) == pytest.approx(chi2.ppf(p, dof), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(u=st.floats(0.1, 200), du=st.floats(0.01, 10))
def test_chi2_quantile_monotone_in_dof(u, du):
    assert chi2_quantile(0.95, u + du) > chi2_quantile(0.95, u)
    assert chi2_sf(chi2_quantile(0.95, u), u) == pytest.approx(0.05, rel=1e-8)

# ---------------------------------------------------------------- bootstrap


def test_degenerate_replicates():
    crit, p, reject = bootstrap_decision(2.0, np.full(200, 1.5), 0.05)
    assert crit == 1.5 and reject and p == 0.0
    crit, p, reject = bootstrap_decision(1.5, np.full(200, 1.5), 0.05)
    assert not reject and p == 1.0


def test_quantile_rank_convention():
    W = np.arange(1, 101, dtype=float)
    crit, _, _ = bootstrap_decision(0.0, W[::-1], 0.05)
    assert crit == 95.0  # rank ceil(0.95 * 100)


@settings(max_examples=30, deadline=None)
@given(t1=st.floats(0, 5), t2=st.floats(0, 5))
def test_p_value_nonincreasing(t1, t2):
    W = np.random.default_rng(0).exponential(size=300)
    lo, hi = min(t1, t2), max(t1, t2)
    assert bootstrap_decision(hi, W, 0.05)[1] <= bootstrap_decision(lo, W, 0.05)[1]


def _X_list(s=4, n=100, seed=0):
    gen = np.random.default_rng(seed)
    return [np.column_stack([gen.uniform(-1, 1, n), np.ones(n)]) for _ in range(s)]


def test_multiplier_sums_match_direct_formula(backend):
    X_list = _X_list(s=3, n=50)
    Q = np.array([[1.0, 0.0]])
    U = multiplier_sums(X_list, Q, 2.0, 5, seed=7)
    E = np.vstack([np.sqrt(2.0) * np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(7, spawn_key=(2, b)))).standard_normal(150) for b in range(5)])
    for j, X in enumerate(X_list):
        A = X.T @ X / 50
        scores = (Q @ np.linalg.solve(A, X.T)).T
        np.testing.assert_allclose(U[:, j, :], E[:, 50 * j:50 * (j + 1)] @ scores, atol=1e-10)


def test_bootstrap_zero_statistic_never_rejects():
    beta = np.tile([1.0, 0.0], (4, 1))
    r = bootstrap_max_test(beta, beta, [[1.0, 0.0]], _X_list(), 1.0, B=200, seed=1)
    assert r.statistic == 0.0 and not r.reject and r.p_value == 1.0
    r = bootstrap_consecutive_test(beta, [[1.0, 0.0]], _X_list(), 1.0, B=200, seed=1)
    assert r.statistic == 0.0 and not r.reject


def test_bootstrap_reproducible_and_thread_invariant():
    gen = np.random.default_rng(5)
    beta = np.column_stack([1 + 0.1 * gen.standard_normal(4), np.zeros(4)])
    runs = [bootstrap_consecutive_test(beta, [[1.0, 0.0]], _X_list(), 1.0, B=300, seed=11, threads=t)
            for t in (1, 1, 3)]
    for r in runs[1:]:
        assert (r.statistic, r.critical_value, r.p_value) == (runs[0].statistic, runs[0].critical_value,
                                                              runs[0].p_value)
    other = bootstrap_consecutive_test(beta, [[1.0, 0.0]], _X_list(), 1.0, B=300, seed=12)
    assert other.critical_value != runs[0].critical_value


def test_bootstrap_detects_large_heterogeneity():
    beta = np.column_stack([np.arange(1.0, 5.0), np.zeros(4)])
    r = bootstrap_consecutive_test(beta, [[1.0, 0.0]], _X_list(), 1.0, B=500, alpha=0.01, seed=2)
    assert r.reject and r.p_value == 0.0


def test_bootstrap_two_groups_is_one_difference():
    beta = np.array([[1.0, 0.0], [1.3, 0.0]])
    r = bootstrap_consecutive_test(beta, [[1.0, 0.0]], _X_list(s=2), 1.0, B=200, seed=3)
    assert r.statistic == pytest.approx(10 * 0.3)


def test_bootstrap_argument_checks():
    beta = np.zeros((3, 2))
    with pytest.raises(ConfigError):
        bootstrap_max_test(beta, beta, [[1.0, 0.0]], _X_list(s=3), 1.0, B=50)
    with pytest.raises(ConfigError):
        bootstrap_consecutive_test(beta[:1], [[1.0, 0.0]], _X_list(s=1), 1.0, B=200)


def test_unequal_sizes_flagged():
    X_list = _X_list(s=2, n=100)
    X_list[1] = X_list[1][:60]
    r = bootstrap_consecutive_test(np.zeros((2, 2)), [[1.0, 0.0]], X_list, 1.0, B=100)
    assert r.metadata["unequal_group_sizes"]

# ---------------------------------------------------------------- LRT


def _group_fits(parts, cfg):
    return [fit_subpop(p, cfg) for p in parts]


def test_lrt_identical_groups_is_zero():
    base = make_partition(n=200, seed=4)
    parts = [Partition(j, base.Y, base.X, base.Z) for j in range(4)]
    fits = _group_fits(parts, unit_config())
    s2 = pooled_sigma2(fits)
    for r in (lrt_homogeneity_component(parts, fits, 0, s2),
              lrt_homogeneity_component(parts, fits, 1, s2, recenter=False),
              lrt_homogeneity_joint(parts, fits, s2)):
        assert r.statistic == 0.0 and not r.reject


def test_lrt_dof_and_oracle_statistic():
    parts = [make_partition(n=200, seed=j, group_id=j) for j in range(4)]
    cfg = unit_config(interior_knots=4)
    fits = _group_fits(parts, cfg)
    s2 = pooled_sigma2(fits)
    r = lrt_homogeneity_component(parts, fits, 0, s2)
    assert r.dof_or_B == pytest.approx(2 / 3 * 3 * 4)
    rj = lrt_homogeneity_joint(parts, fits, s2)
    assert rj.dof_or_B == pytest.approx(2 / 3 * 3 * 2 * 4)
    # independent recomputation of the swapped losses
    total = 0.0
    for j in range(3):
        own = fits[j].component_values(parts[j].Z)
        sub = fits[j + 1].component_values(parts[j].Z)[:, 0]
        sub = sub - sub.mean()
        base = parts[j].Y - parts[j].X @ fits[j].beta_hat
        r_own = base - own.sum(axis=1)
        r_swap = base - own[:, 1] - sub
        total += (r_swap @ r_swap - r_own @ r_own) / 2
    assert r.statistic == pytest.approx(total / (3 * s2), rel=1e-10)
    assert r.p_value == pytest.approx(chi2.sf(r.statistic, r.dof_or_B), rel=1e-8)
    assert r.reject == (r.statistic > r.critical_value)


def test_lrt_joint_equals_component_when_single_covariate():
    cfg = SplineConfig(3, 4, (AffineMap(-1.0, 2.0, "z"),))
    parts = []
    for j in range(3):
        p = make_partition(n=150, K=1, seed=20 + j, group_id=j)
        parts.append(p)
    fits = _group_fits(parts, cfg)
    s2 = pooled_sigma2(fits)
    a = lrt_homogeneity_component(parts, fits, 0, s2)
    b = lrt_homogeneity_joint(parts, fits, s2)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
    assert a.dof_or_B == b.dof_or_B


def test_lrt_argument_checks():
    parts = [make_partition(n=120, seed=0)]
    fits = _group_fits(parts, unit_config())
    with pytest.raises(ConfigError):
        lrt_homogeneity_component(parts, fits, 0, 1.0)
    parts2 = parts + [make_partition(n=120, seed=1)]
    fits2 = _group_fits(parts2, unit_config())
    with pytest.raises(ConfigError):
        lrt_homogeneity_component(parts2, fits2, 5, 1.0)
