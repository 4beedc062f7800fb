"""Clamped uniform B-spline bases on [0, 1] and their sample-centered versions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    DegenerateBasisError,
    DegenerateCovariateError,
    DomainError,
)

# slack for values produced by the affine map that land a rounding error outside [0, 1]
DOMAIN_SLACK = 1e-10


@dataclass(frozen=True)
class AffineMap:
    """``z -> (z - offset) / scale`` carrying a raw covariate range onto [0, 1]."""

    offset: float
    scale: float
    name: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.offset) or not np.isfinite(self.scale) or self.scale <= 0:
            raise ConfigError(f"affine map for {self.name!r} needs finite offset and scale > 0")

    def __call__(self, z):
        return (np.asarray(z, dtype=np.float64) - self.offset) / self.scale

    def inverse(self, u):
        return np.asarray(u, dtype=np.float64) * self.scale + self.offset

    def to_dict(self):
        return {"offset": self.offset, "scale": self.scale, "name": self.name}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["offset"]), float(d["scale"]), d.get("name"))


def fit_domain_transform(column, name=None) -> AffineMap:
    """Affine map sending ``[min(column), max(column)]`` onto [0, 1].

    Raises
    ------
    DegenerateCovariateError
        If the column is constant (or empty).
    """
    z = np.asarray(column, dtype=np.float64)
    if z.size == 0:
        raise DegenerateCovariateError(f"column {name!r} is empty")
    lo, hi = float(np.min(z)), float(np.max(z))
    if not hi > lo:
        raise DegenerateCovariateError(f"column {name!r} is constant ({lo!r}); cannot map onto [0, 1]")
    return AffineMap(lo, hi - lo, name)


def make_knots(degree: int, interior_knots: int) -> np.ndarray:
    """Clamped knot vector with ``interior_knots`` equally spaced interior knots.

    >>> make_knots(3, 1).tolist()
    [0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]
    """
    if int(degree) != degree or degree < 1:
        raise ConfigError(f"spline degree must be an integer >= 1, got {degree!r}")
    if int(interior_knots) != interior_knots or interior_knots < 0:
        raise ConfigError(f"interior knot count must be an integer >= 0, got {interior_knots!r}")
    degree, interior_knots = int(degree), int(interior_knots)
    interior = np.arange(1, interior_knots + 1) / (interior_knots + 1)
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


@dataclass(frozen=True)
class SplineConfig:
    """Shared basis description for every sub-population.

    ``transforms`` holds one affine map per spline covariate; all groups must use
    the same maps for their coefficient vectors to be comparable.
    """

    degree: int = 3
    interior_knots: int = 5
    transforms: tuple = field(default_factory=tuple)
    reference: int = 0
    scale_columns: bool = False

    def __post_init__(self):
        make_knots(self.degree, self.interior_knots)  # validates
        object.__setattr__(self, "transforms", tuple(self.transforms))
        for t in self.transforms:
            if not isinstance(t, AffineMap):
                raise ConfigError("transforms must be AffineMap instances")
        if not 0 <= self.reference < self.n_raw:
            raise ConfigError(f"reference index {self.reference} outside 0..{self.n_raw - 1}")

    @property
    def knots(self) -> np.ndarray:
        return make_knots(self.degree, self.interior_knots)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.interior_knots + 1)

    @property
    def n_raw(self) -> int:
        return self.interior_knots + self.degree + 1

    @property
    def n_centered(self) -> int:
        return self.interior_knots + self.degree

    @property
    def n_components(self) -> int:
        return len(self.transforms)

    @property
    def names(self) -> list:
        return [t.name if t.name is not None else f"z{k}" for k, t in enumerate(self.transforms)]

    def with_transforms(self, transforms) -> "SplineConfig":
        return SplineConfig(self.degree, self.interior_knots, tuple(transforms), self.reference,
                            self.scale_columns)

    def same_basis(self, other: "SplineConfig") -> bool:
        return (
            self.degree == other.degree
            and self.interior_knots == other.interior_knots
            and self.reference == other.reference
            and self.transforms == other.transforms
        )

    def to_unit(self, Z) -> np.ndarray:
        """Map raw spline covariates (n, K) onto [0, 1]^K, checking the domain."""
        Z = np.atleast_1d(np.asarray(Z, dtype=np.float64))
        if Z.ndim == 1:
            Z = Z.reshape(1, -1) if Z.shape[0] == self.n_components else Z.reshape(-1, 1)
        if Z.shape[1] != self.n_components:
            raise ConfigError(
                f"expected {self.n_components} spline columns, got {Z.shape[1]}"
            )
        U = np.empty_like(Z)
        for k, t in enumerate(self.transforms):
            u = t(Z[:, k])
            bad = ~((u >= -DOMAIN_SLACK) & (u <= 1.0 + DOMAIN_SLACK))
            if bad.any():
                i = int(np.argmax(bad))
                raise DomainError(self.names[k], float(Z[i, k]))
            U[:, k] = np.clip(u, 0.0, 1.0)
        return U

    def raw_blocks(self, Z) -> list:
        """Raw basis matrices, one (n, n_raw) block per spline covariate."""
        U = self.to_unit(Z)
        knots = self.knots
        return [kernels.bspline_design(U[:, k], knots, self.degree) for k in range(U.shape[1])]

    def to_dict(self):
        return {
            "degree": self.degree,
            "interior_knots": self.interior_knots,
            "reference": self.reference,
            "scale_columns": self.scale_columns,
            "transforms": [t.to_dict() for t in self.transforms],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            int(d["degree"]),
            int(d["interior_knots"]),
            tuple(AffineMap.from_dict(t) for t in d["transforms"]),
            int(d.get("reference", 0)),
            bool(d.get("scale_columns", False)),
        )


def eval_raw_basis(knots, degree: int, z) -> np.ndarray:
    """Raw B-spline values at ``z``.

    Scalar ``z`` gives a vector of length ``len(knots) - degree - 1``; an array
    gives one row per point.
    """
    knots = np.asarray(knots, dtype=np.float64)
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=np.float64))
    lo, hi = knots[degree], knots[-degree - 1]
    bad = ~((zz >= lo) & (zz <= hi))
    if bad.any():
        raise DomainError(None, float(zz[np.argmax(bad)]),
                          f"basis argument {float(zz[np.argmax(bad)])!r} outside [{lo}, {hi}]")
    out = kernels.bspline_design(zz, knots, degree)
    return out[0] if scalar else out


def center_basis(raw, reference: int = 0, means=None) -> np.ndarray:
    """Drop the reference column and center the rest against it.

    Column ``m`` becomes ``b_m - (mean(b_m) / mean(b_ref)) * b_ref``. ``means``
    are the column means over the centering sample; by default the rows of
    ``raw`` themselves.
    """
    raw = np.asarray(raw, dtype=np.float64)
    mu = raw.mean(axis=0) if means is None else np.asarray(means, dtype=np.float64)
    if abs(mu[reference]) < 1e-12:
        raise DegenerateBasisError(
            f"reference basis column {reference} has sample mean {mu[reference]:.3g}; "
            "the centering sample does not reach its support"
        )
    keep = np.delete(np.arange(raw.shape[1]), reference)
    ratio = mu[keep] / mu[reference]
    return raw[:, keep] - np.outer(raw[:, reference], ratio)


def centered_to_raw(gamma, means, reference: int = 0) -> np.ndarray:
    """Raw-basis coefficients of the function ``sum_m gamma_m b*_m``.

    The result ``c`` satisfies ``means @ c == 0`` (up to rounding): the function
    has zero mean over the centering sample.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    mu = np.asarray(means, dtype=np.float64)
    keep = np.delete(np.arange(mu.shape[0]), reference)
    c = np.zeros(mu.shape[0])
    c[keep] = gamma
    c[reference] = -np.dot(gamma, mu[keep]) / mu[reference]
    return c


def raw_to_centered(coef, means, reference: int = 0):
    """Express ``f = sum_m coef_m b_m`` re-centered over a new sample.

    Returns ``(gamma, shift)`` where ``shift = means @ coef`` is the sample mean of
    ``f`` and ``gamma`` are the coefficients of ``f - shift`` in the basis centered
    with ``means``. Relies on the partition of unity (``sum(means) == 1``).
    """
    coef = np.asarray(coef, dtype=np.float64)
    mu = np.asarray(means, dtype=np.float64)
    shift = float(mu @ coef)
    keep = np.delete(np.arange(mu.shape[0]), reference)
    return coef[keep] - shift, shift
