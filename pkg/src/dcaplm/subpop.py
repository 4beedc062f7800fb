"""Per-sub-population least-squares fit of the additive partially linear model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Partition
from .errors import ConfigError, SingularDesignError, UnderdeterminedGroupError
from .linalg import RANK_TOL, solve_ls
from .spline_basis import SplineConfig, center_basis, centered_to_raw


@dataclass
class SubPopFit:
    """Result of fitting one group.

    ``gamma_hat`` holds the coefficients of the group-centered basis, component
    by component (``K`` blocks of ``J_N + degree``); ``basis_means`` are the raw
    basis column means over the group, which define that centering and also
    serve as the group's contribution to pooled (whole-sample) means.
    """

    group_id: object
    n: int
    beta_hat: np.ndarray
    gamma_hat: np.ndarray
    basis_means: np.ndarray
    centering_constants: np.ndarray
    sigma2_hat: float
    D_hat: np.ndarray
    A_hat: np.ndarray
    rss: float
    config: SplineConfig

    @property
    def d(self) -> int:
        return self.beta_hat.shape[0]

    @property
    def raw_gamma(self) -> np.ndarray:
        """Raw-basis coefficients, shape (K, J_N + degree + 1)."""
        q = self.config.n_centered
        ref = self.config.reference
        return np.array([
            centered_to_raw(self.gamma_hat[k * q:(k + 1) * q], self.basis_means[k], ref)
            for k in range(self.config.n_components)
        ]).reshape(self.config.n_components, self.config.n_raw)

    def component_values(self, Z, constants=None) -> np.ndarray:
        """Component functions at the rows of ``Z`` (raw units), shape (n, K).

        ``constants`` defaults to the group centering constants.
        """
        c = self.centering_constants if constants is None else np.asarray(constants, dtype=np.float64)
        return component_values(self.raw_gamma, self.config, Z, c)

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "n": self.n,
            "beta_hat": self.beta_hat.tolist(),
            "gamma_hat": self.gamma_hat.tolist(),
            "basis_means": self.basis_means.tolist(),
            "centering_constants": self.centering_constants.tolist(),
            "sigma2_hat": self.sigma2_hat,
            "D_hat": self.D_hat.tolist(),
            "A_hat": self.A_hat.tolist(),
            "rss": self.rss,
        }

    @classmethod
    def from_dict(cls, d: dict, config: SplineConfig) -> "SubPopFit":
        return cls(
            d["group_id"],
            int(d["n"]),
            np.asarray(d["beta_hat"], dtype=np.float64),
            np.asarray(d["gamma_hat"], dtype=np.float64),
            np.asarray(d["basis_means"], dtype=np.float64).reshape(config.n_components, config.n_raw),
            np.asarray(d["centering_constants"], dtype=np.float64),
            float(d["sigma2_hat"]),
            np.asarray(d["D_hat"], dtype=np.float64),
            np.asarray(d["A_hat"], dtype=np.float64),
            float(d["rss"]),
            config,
        )


def component_values(raw_gamma, config: SplineConfig, Z, constants) -> np.ndarray:
    blocks = config.raw_blocks(Z)
    raw_gamma = np.asarray(raw_gamma, dtype=np.float64)
    out = np.column_stack([b @ raw_gamma[k] for k, b in enumerate(blocks)])
    return out - np.asarray(constants, dtype=np.float64)


def n_parameters(d: int, config: SplineConfig) -> int:
    return d + config.n_components * config.n_centered


def estimate_sigma2(residuals, n: int, d: int, K: int, interior_knots: int, degree: int) -> float:
    """Residual variance ``RSS / (n - d - K (J_N + degree))``."""
    dof = n - d - K * (interior_knots + degree)
    if dof <= 0:
        raise UnderdeterminedGroupError(
            f"residual degrees of freedom n - d - K(J_N+degree) = {dof} must be positive"
        )
    r = np.asarray(residuals, dtype=np.float64)
    return float(r @ r) / dof


def _centered_design(blocks, config: SplineConfig):
    means = np.array([b.mean(axis=0) for b in blocks]).reshape(len(blocks), config.n_raw)
    cols = [center_basis(b, config.reference, means=mu) for b, mu in zip(blocks, means)]
    S = np.hstack(cols) if cols else np.zeros((blocks[0].shape[0] if blocks else 0, 0))
    return S, means


def _spline_residuals(S, X, rank_tol):
    if S.shape[1] == 0:
        return X.copy()
    return X - S @ solve_ls(S, X, rank_tol=rank_tol)


def estimate_D_hat(data: Partition, config: SplineConfig, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``(1/n) sum_i Xt_i Xt_i'`` with ``Xt`` the residual of X regressed on the
    group-centered spline block of Z."""
    S, _ = _centered_design(config.raw_blocks(data.Z), config)
    Xt = _spline_residuals(S, data.X, rank_tol)
    return Xt.T @ Xt / data.n


def fit_subpop(data: Partition, config: SplineConfig, rank_tol: float = RANK_TOL) -> SubPopFit:
    """Joint least squares over (gamma, beta) with a group-centered spline basis.

    Raises
    ------
    UnderdeterminedGroupError
        If ``n <= d + K (J_N + degree)``.
    SingularDesignError
        If the design is rank deficient; ``group_id`` is attached.
    """
    n, d = data.X.shape
    K = data.Z.shape[1]
    if K != config.n_components:
        raise ConfigError(f"group {data.group_id!r}: {K} spline columns but config has {config.n_components}")
    p = n_parameters(d, config)
    if n <= p:
        raise UnderdeterminedGroupError(
            f"group {data.group_id!r} has {n} observations for {p} parameters", group_id=data.group_id
        )

    blocks = config.raw_blocks(data.Z)
    S, means = _centered_design(blocks, config)
    design = np.hstack([S, data.X])
    scale = np.ones(design.shape[1])
    if config.scale_columns:
        rms = np.sqrt(np.mean(design**2, axis=0))
        scale = np.where(rms > 0, rms, 1.0)
    try:
        coef = solve_ls(design / scale, data.Y, rank_tol=rank_tol) / scale
        Xt = _spline_residuals(S, data.X, rank_tol)
    except SingularDesignError as exc:
        raise SingularDesignError(f"group {data.group_id!r}: {exc}", column=exc.column,
                                  group_id=data.group_id) from None

    q = S.shape[1]
    gamma, beta = coef[:q], coef[q:]
    resid = data.Y - design @ coef
    sigma2 = estimate_sigma2(resid, n, d, K, config.interior_knots, config.degree)

    fit = SubPopFit(
        group_id=data.group_id,
        n=n,
        beta_hat=beta,
        gamma_hat=gamma,
        basis_means=means,
        centering_constants=np.zeros(K),
        sigma2_hat=sigma2,
        D_hat=Xt.T @ Xt / n,
        A_hat=data.X.T @ data.X / n,
        rss=float(resid @ resid),
        config=config,
    )
    # the centered parameterization already has zero group mean; record the
    # residual rounding so eval with group centering is exactly mean-zero
    raw = fit.raw_gamma
    fit.centering_constants = np.array([means[k] @ raw[k] for k in range(K)])
    return fit


def eval_g(fit: SubPopFit, Z, centering="group", constants=None) -> np.ndarray:
    """Additive function ``sum_k g_k(z_k)`` at the rows of ``Z`` (raw units).

    Parameters
    ----------
    centering : {"group", "whole_sample"}
        ``"group"`` subtracts the group's own centering constants. With
        ``"whole_sample"``, ``constants`` must hold the K whole-sample constants
        (see :func:`dcaplm.aggregate.whole_sample_constants`).
    """
    if centering == "group":
        c = fit.centering_constants
    elif centering == "whole_sample":
        if constants is None:
            raise ConfigError("whole-sample centering needs the K centering constants")
        c = np.asarray(constants, dtype=np.float64)
    else:
        raise ConfigError(f"unknown centering {centering!r}")
    vals = fit.component_values(Z, c)
    out = vals.sum(axis=1)
    if np.ndim(Z) <= 1 and out.shape[0] == 1:
        return float(out[0])
    return out
