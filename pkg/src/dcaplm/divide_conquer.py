"""One full divide-and-conquer pass: shared basis, per-group fits, aggregation,
and the boosting refit."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .aggregate import AggregatedFit, aggregate_beta, aggregate_g, boost_beta
from .data import Dataset
from .inference import pooled_sigma2
from .spline_basis import SplineConfig, fit_domain_transform
from .subpop import fit_subpop


@dataclass
class DcResult:
    config: SplineConfig
    partitions: list
    fits: list
    agg: AggregatedFit
    sigma2_bar: float

    @property
    def group_ids(self) -> list:
        return [f.group_id for f in self.fits]

    def beta_breve(self, j: int) -> np.ndarray:
        return self.agg.beta_breve[self.fits[j].group_id]


def shared_config(dataset: Dataset, degree=3, interior_knots=5, transforms=None,
                  scale_columns=False) -> SplineConfig:
    """Spline configuration with domain maps fitted on the pooled sample."""
    if transforms is None:
        transforms = [fit_domain_transform(dataset.Z[:, k], name)
                      for k, name in enumerate(dataset.z_names)]
    return SplineConfig(degree, interior_knots, tuple(transforms), scale_columns=scale_columns)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def fit_partitions(parts, config: SplineConfig, threads: int = 1) -> list:
    """Fit every group; a failure names its group and aborts."""
    return _map(lambda p: fit_subpop(p, config), list(parts), threads)


def fit_divide_and_conquer(dataset: Dataset, degree=3, interior_knots=5, weights="uniform",
                           homogeneous=False, threads=1, transforms=None,
                           scale_columns=False) -> DcResult:
    config = shared_config(dataset, degree, interior_knots, transforms, scale_columns)
    parts = dataset.partitions()
    fits = fit_partitions(parts, config, threads)
    agg = aggregate_g(fits, weights)
    breve = _map(lambda p: boost_beta(p, agg), parts, threads)
    agg.beta_breve = {f.group_id: b for f, b in zip(fits, breve)}
    if homogeneous:
        agg.beta_bar = aggregate_beta(fits, weights)
    return DcResult(config, parts, fits, agg, pooled_sigma2(fits))
