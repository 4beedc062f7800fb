"""Pooled error variance and Wald-type confidence intervals for linear coefficients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, NotPositiveDefiniteError
from .linalg import inv_symmetric


@dataclass(frozen=True)
class CiResult:
    center: np.ndarray
    halfwidth: np.ndarray
    level: float
    variant: str  # "CI1_Dbased" | "CI2_Abased"

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.halfwidth

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.halfwidth

    def covers(self, value) -> np.ndarray:
        v = np.asarray(value, dtype=np.float64)
        return (self.lower <= v) & (v <= self.upper)

    @property
    def length(self) -> np.ndarray:
        return 2.0 * self.halfwidth


def pooled_sigma2(fits) -> float:
    """Unweighted mean of the group residual variances."""
    fits = list(fits)
    if not fits:
        raise ConfigError("pooled_sigma2 needs at least one fit")
    return float(np.mean([f.sigma2_hat for f in fits]))


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def ci_beta(center, matrix, sigma2: float, n: int, level: float = 0.95,
            variant: str = "CI1_Dbased") -> CiResult:
    """Coordinate-wise interval ``center +- z * sigma * sqrt(diag(M^-1) / n)``.

    ``matrix`` is ``D_hat`` around ``beta_hat`` (``CI1_Dbased``) or ``A_hat``
    around the boosted ``beta_breve`` (``CI2_Abased``).
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"confidence level must lie in (0, 1), got {level!r}")
    if variant not in ("CI1_Dbased", "CI2_Abased"):
        raise ConfigError(f"unknown interval variant {variant!r}")
    if sigma2 < 0 or n <= 0:
        raise ConfigError("sigma2 must be >= 0 and n > 0")
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    M = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if M.shape != (center.shape[0], center.shape[0]):
        raise ConfigError("variance matrix does not match the coefficient dimension")
    Minv = inv_symmetric(M)
    diag = np.diag(Minv)
    if (diag <= 0).any():
        raise NotPositiveDefiniteError("variance matrix inverse has a nonpositive diagonal")
    z = normal_quantile(0.5 * (1.0 + level))
    half = z * np.sqrt(sigma2) * np.sqrt(diag / n)
    return CiResult(center, half, float(level), variant)
