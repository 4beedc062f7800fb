from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_partition, unit_config
from dcaplm.data import Partition
from dcaplm.errors import SingularDesignError, UnderdeterminedGroupError
from dcaplm.spline_basis import center_basis
from dcaplm.subpop import SubPopFit, estimate_D_hat, estimate_sigma2, eval_g, fit_subpop


def _oracle_design(part, cfg):
    # build the design independently from the raw basis and the centering formula
    blocks = cfg.raw_blocks(part.Z)
    cols = []
    for b in blocks:
        mu = b.mean(axis=0)
        cols.append(np.delete(b - np.outer(b[:, 0], mu / mu[0]), 0, axis=1))
    return np.hstack(cols)


def test_joint_fit_matches_lstsq_oracle(backend):
    part = make_partition(n=400, seed=1)
    cfg = unit_config()
    fit = fit_subpop(part, cfg)
    S = _oracle_design(part, cfg)
    coef, *_ = np.linalg.lstsq(np.hstack([S, part.X]), part.Y, rcond=None)
    np.testing.assert_allclose(fit.beta_hat, coef[S.shape[1]:], rtol=1e-9)
    np.testing.assert_allclose(fit.gamma_hat, coef[:S.shape[1]], rtol=1e-7, atol=1e-8)


def test_sigma2_uses_residual_degrees_of_freedom():
    part = make_partition(n=250, seed=2)
    cfg = unit_config(interior_knots=4)
    fit = fit_subpop(part, cfg)
    assert fit.sigma2_hat == pytest.approx(fit.rss / (250 - 2 - 2 * (4 + 3)), rel=1e-12)
    with pytest.raises(UnderdeterminedGroupError):
        estimate_sigma2(np.ones(10), 10, 2, 1, 5, 3)


def test_D_hat_is_spline_residual_second_moment():
    part = make_partition(n=300, seed=3)
    cfg = unit_config()
    S = _oracle_design(part, cfg)
    P = S @ np.linalg.pinv(S)
    Xt = part.X - P @ part.X
    np.testing.assert_allclose(estimate_D_hat(part, cfg), Xt.T @ Xt / 300, atol=1e-10)
    fit = fit_subpop(part, cfg)
    np.testing.assert_allclose(fit.D_hat, Xt.T @ Xt / 300, atol=1e-10)
    np.testing.assert_allclose(fit.A_hat, part.X.T @ part.X / 300)


def test_exact_recovery_in_spline_span(backend):
    # cubic polynomials lie in every cubic spline space; the intercept absorbs the sample mean
    gen = np.random.default_rng(4)
    Z = gen.uniform(-1, 1, size=(200, 2))
    X = np.column_stack([gen.standard_normal(200), np.ones(200)])
    g = (Z[:, 0] ** 3 - 0.5 * Z[:, 0]) + (Z[:, 1] ** 2 - 1 / 3)
    Y = X @ [2.5, 0.0] + g
    fit = fit_subpop(Partition(1, Y, X, Z), unit_config())
    assert abs(fit.beta_hat[0] - 2.5) < 1e-8
    np.testing.assert_allclose(eval_g(fit, Z) + fit.beta_hat[1], g, atol=1e-8)
    assert fit.rss < 1e-16


def test_components_are_mean_zero_over_group():
    part = make_partition(n=300, seed=5)
    fit = fit_subpop(part, unit_config())
    np.testing.assert_allclose(fit.component_values(part.Z).mean(axis=0), 0.0, atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-50, 50), seed=st.integers(0, 1000))
def test_response_shift_invariance_with_centered_covariates(c, seed):
    # with no intercept the shift is only absorbed when X has sample mean zero
    part = make_partition(n=150, seed=seed, intercept=False)
    X = part.X - part.X.mean(axis=0)
    p0 = Partition(1, part.Y, X, part.Z)
    p1 = Partition(1, part.Y + c, X, part.Z)
    cfg = unit_config()
    b0, b1 = fit_subpop(p0, cfg).beta_hat, fit_subpop(p1, cfg).beta_hat
    np.testing.assert_allclose(b1, b0, atol=1e-8 * (1 + abs(c)))


def test_response_shift_absorbed_by_intercept():
    part = make_partition(n=150, seed=9)
    cfg = unit_config()
    f0 = fit_subpop(part, cfg)
    f1 = fit_subpop(Partition(1, part.Y + 7.0, part.X, part.Z), cfg)
    np.testing.assert_allclose(f1.beta_hat - f0.beta_hat, [0.0, 7.0], atol=1e-9)
    np.testing.assert_allclose(f1.gamma_hat, f0.gamma_hat, atol=1e-8)


def test_underdetermined_group():
    part = make_partition(n=15, seed=6)
    with pytest.raises(UnderdeterminedGroupError) as err:
        fit_subpop(part, unit_config())
    assert err.value.group_id == 1


def test_collinear_covariate_names_group():
    part = make_partition(n=200, seed=7)
    X = np.column_stack([part.X, part.X[:, 0] * 2.0])
    with pytest.raises(SingularDesignError) as err:
        fit_subpop(Partition("g7", part.Y, X, part.Z), unit_config())
    assert err.value.group_id == "g7" and "g7" in str(err.value)


def test_column_scaling_does_not_change_the_fit():
    part = make_partition(n=300, seed=8)
    cfg = unit_config()
    a = fit_subpop(part, cfg)
    b = fit_subpop(part, cfg.__class__(**{**cfg.__dict__, "scale_columns": True}))
    np.testing.assert_allclose(a.beta_hat, b.beta_hat, rtol=1e-9)


def test_round_trip_and_scalar_eval():
    part = make_partition(n=200, seed=10)
    cfg = unit_config()
    fit = fit_subpop(part, cfg)
    back = SubPopFit.from_dict(fit.to_dict(), cfg)
    np.testing.assert_array_equal(back.raw_gamma, fit.raw_gamma)
    v = eval_g(fit, np.array([0.1, -0.2]))
    assert isinstance(v, float)
    assert v == pytest.approx(eval_g(fit, np.array([[0.1, -0.2]]))[0])


def test_centered_design_matches_module_centering():
    part = make_partition(n=100, seed=11)
    cfg = unit_config()
    blocks = cfg.raw_blocks(part.Z)
    np.testing.assert_allclose(
        np.hstack([center_basis(b) for b in blocks]), _oracle_design(part, cfg), atol=1e-13)
