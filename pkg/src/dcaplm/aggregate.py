"""Combine sub-population fits: the common additive function, the homogeneous
average of linear coefficients, and per-group refits against the common function."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Partition
from .errors import ConfigError, IncompatibleFitError
from .linalg import RANK_TOL, solve_ls
from .spline_basis import SplineConfig, raw_to_centered
from .subpop import SubPopFit, component_values


@dataclass
class AggregatedFit:
    """Aggregated common function and (optionally) linear coefficients.

    ``raw_gamma`` are the weighted-average raw-basis coefficients (K, n_raw);
    ``whole_sample_centering`` are the constants that make each component
    mean-zero over the pooled sample, and ``gbar_gamma`` the same function's
    coefficients in the basis centered on pooled means.
    """

    config: SplineConfig
    weights: np.ndarray
    group_ids: list
    raw_gamma: np.ndarray
    pooled_means: np.ndarray
    whole_sample_centering: np.ndarray
    gbar_gamma: np.ndarray
    N: int
    beta_bar: np.ndarray | None = None
    beta_breve: dict = field(default_factory=dict)

    def component_values(self, Z) -> np.ndarray:
        return component_values(self.raw_gamma, self.config, Z, self.whole_sample_centering)

    def __call__(self, Z) -> np.ndarray:
        return self.component_values(Z).sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "group_ids": list(self.group_ids),
            "raw_gamma": self.raw_gamma.tolist(),
            "pooled_means": self.pooled_means.tolist(),
            "whole_sample_centering": self.whole_sample_centering.tolist(),
            "gbar_gamma": self.gbar_gamma.tolist(),
            "N": self.N,
            "beta_bar": None if self.beta_bar is None else self.beta_bar.tolist(),
            "beta_breve": [[g, np.asarray(b).tolist()] for g, b in self.beta_breve.items()],
        }

    @classmethod
    def from_dict(cls, d: dict, config: SplineConfig) -> "AggregatedFit":
        return cls(
            config=config,
            weights=np.asarray(d["weights"], dtype=np.float64),
            group_ids=list(d["group_ids"]),
            raw_gamma=np.asarray(d["raw_gamma"], dtype=np.float64),
            pooled_means=np.asarray(d["pooled_means"], dtype=np.float64),
            whole_sample_centering=np.asarray(d["whole_sample_centering"], dtype=np.float64),
            gbar_gamma=np.asarray(d["gbar_gamma"], dtype=np.float64),
            N=int(d["N"]),
            beta_bar=None if d.get("beta_bar") is None else np.asarray(d["beta_bar"], dtype=np.float64),
            beta_breve={g: np.asarray(b, dtype=np.float64) for g, b in d.get("beta_breve", [])},
        )


def resolve_weights(fits, weights="uniform") -> np.ndarray:
    s = len(fits)
    if isinstance(weights, str):
        if weights == "uniform":
            return np.full(s, 1.0 / s)
        if weights == "by_size":
            n = np.array([f.n for f in fits], dtype=np.float64)
            return n / n.sum()
        raise ConfigError(f"unknown weights mode {weights!r}; use 'uniform' or 'by_size'")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (s,) or (w < 0).any() or not np.isfinite(w).all():
        raise ConfigError("explicit weights must be nonnegative, finite, one per fit")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ConfigError(f"explicit weights must sum to 1 (got {w.sum()!r})")
    return w


def pooled_basis_means(fits) -> np.ndarray:
    """Whole-sample raw basis means from the per-group means (exact pooling)."""
    n = np.array([f.n for f in fits], dtype=np.float64)
    acc = np.zeros_like(fits[0].basis_means)
    for f, nj in zip(fits, n):
        acc += nj * f.basis_means
    return acc / n.sum()


def whole_sample_constants(fit: SubPopFit, pooled_means) -> np.ndarray:
    """Constants that center each of ``fit``'s components over the pooled sample."""
    raw = fit.raw_gamma
    return np.array([pooled_means[k] @ raw[k] for k in range(raw.shape[0])])


def _check_compatible(fits):
    if not fits:
        raise IncompatibleFitError("no fits to aggregate")
    cfg = fits[0].config
    for f in fits[1:]:
        if not cfg.same_basis(f.config):
            raise IncompatibleFitError(
                f"group {f.group_id!r} was fitted with a different spline configuration"
            )
    d = fits[0].d
    if any(f.d != d for f in fits):
        raise IncompatibleFitError("fits disagree on the number of linear covariates")


def aggregate_g(fits, weights="uniform") -> AggregatedFit:
    """Weighted average of the group estimates of the common function.

    Reduction runs in list order, so the result does not depend on how the fits
    were produced.
    """
    fits = list(fits)
    _check_compatible(fits)
    cfg = fits[0].config
    w = resolve_weights(fits, weights)
    raw = np.zeros((cfg.n_components, cfg.n_raw))
    for wj, f in zip(w, fits):
        raw += wj * f.raw_gamma
    pooled = pooled_basis_means(fits)
    q = cfg.n_centered
    gbar = np.zeros(cfg.n_components * q)
    mu = np.zeros(cfg.n_components)
    for k in range(cfg.n_components):
        gbar[k * q:(k + 1) * q], mu[k] = raw_to_centered(raw[k], pooled[k], cfg.reference)
    return AggregatedFit(
        config=cfg,
        weights=w,
        group_ids=[f.group_id for f in fits],
        raw_gamma=raw,
        pooled_means=pooled,
        whole_sample_centering=mu,
        gbar_gamma=gbar,
        N=int(sum(f.n for f in fits)),
    )


def aggregate_beta(fits, weights="uniform") -> np.ndarray:
    """Weighted average of the per-group ``beta_hat``; meant for homogeneous data."""
    fits = list(fits)
    if not fits:
        raise IncompatibleFitError("no fits to aggregate")
    w = resolve_weights(fits, weights)
    out = np.zeros(fits[0].d)
    for wj, f in zip(w, fits):
        out += wj * f.beta_hat
    return out


def boost_beta(data: Partition, agg: AggregatedFit, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Least squares of ``Y - gbar(Z)`` on ``X`` within one group."""
    offset = agg(data.Z)
    return solve_ls(data.X, data.Y - offset, rank_tol=rank_tol)
