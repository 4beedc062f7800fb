"""Columnar dataset and per-group partitions."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyDatasetError


@dataclass(frozen=True)
class Partition:
    """Observations of one sub-population: response, linear and spline covariates."""

    group_id: object
    Y: np.ndarray
    X: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        Z = np.asarray(self.Z, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        if not (Y.shape[0] == X.shape[0] == Z.shape[0]):
            raise DataError(f"group {self.group_id!r}: Y, X and Z have different row counts")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self) -> int:
        return self.Y.shape[0]


def _natural_key(label):
    s = str(label)
    try:
        return (0, float(s), s)
    except ValueError:
        return (1, [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)], s)


@dataclass
class Dataset:
    """Column store of Y (n,), X (n, d), Z (n, K) and group labels (n,).

    Groups are ordered naturally (numeric labels by value, others by string
    with embedded integers compared numerically); that order is the index
    order used by every reduction and by the consecutive-difference tests.
    """

    Y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    groups: np.ndarray
    x_names: list = field(default_factory=list)
    z_names: list = field(default_factory=list)
    y_name: str = "y"

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64).reshape(-1)
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Z = np.asarray(self.Z, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        if self.Z.ndim == 1:
            self.Z = self.Z.reshape(-1, 1)
        self.groups = np.asarray(self.groups)
        n = self.Y.shape[0]
        if n == 0:
            raise EmptyDatasetError("dataset has no rows")
        if not (self.X.shape[0] == self.Z.shape[0] == self.groups.shape[0] == n):
            raise DataError("columns have unequal lengths")
        if not self.x_names:
            self.x_names = [f"x{i}" for i in range(self.X.shape[1])]
        if not self.z_names:
            self.z_names = [f"z{k}" for k in range(self.Z.shape[1])]

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    def group_labels(self) -> list:
        return sorted(set(self.groups.tolist()), key=_natural_key)

    def partitions(self) -> list:
        out = []
        for g in self.group_labels():
            idx = np.flatnonzero(self.groups == g)
            out.append(Partition(g, self.Y[idx], self.X[idx], self.Z[idx]))
        return out

    @classmethod
    def from_partitions(cls, parts, x_names=None, z_names=None, y_name="y") -> "Dataset":
        parts = list(parts)
        if not parts:
            raise EmptyDatasetError("no partitions")
        return cls(
            np.concatenate([p.Y for p in parts]),
            np.vstack([p.X for p in parts]),
            np.vstack([p.Z for p in parts]),
            np.concatenate([np.full(p.n, p.group_id, dtype=object) for p in parts]),
            list(x_names or []),
            list(z_names or []),
            y_name,
        )
