"""Simulated heterogeneous data and Monte Carlo experiment drivers.

Data-generating process, for group ``j`` of size ``n = N / s``::

    Z1, Z2, W ~ U(-1, 1) independent,  X = (W + Z1) / 2
    Y = X * beta_j + g1(Z1) + g2(Z2) + eps,  eps ~ N(0, sigma^2)
    g1(z) = 5 sin(2 pi (z + 1))
    g2(z) = 100 (exp(-1.625 u) - 4 exp(-3.25 u) + 3 exp(-4.875 u)) - C0,  u = z + 1

so that ``E g1 = E g2 = 0``, ``E X^2 = 1/6`` and ``E (X - E[X|Z])^2 = 1/12``.
Group ``j`` draws from its own keyed stream (``rng.stream(seed, DATA, j)``),
in the fixed order Z (n x 2 uniforms), W, eps.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng
from .aggregate import whole_sample_constants
from .data import Dataset
from .divide_conquer import fit_divide_and_conquer
from .errors import ConfigError, DcaplmError
from .hypothesis_tests import (
    bootstrap_consecutive_test,
    bootstrap_max_test,
    lrt_homogeneity_component,
    lrt_homogeneity_joint,
    wald_pairwise,
)
from .inference import ci_beta

C0 = (100 * (1 - math.exp(-3.25)) / 3.25
      - 400 * (1 - math.exp(-6.5)) / 6.5
      + 300 * (1 - math.exp(-9.75)) / 9.75)

TRUE_D = 1.0 / 12.0
TRUE_A = 1.0 / 6.0

BETA_SCHEMES = ("heterogeneous", "homogeneous", "shifted")
G_MODELS = ("sine_exp", "cubic")


def g1(z):
    return 5.0 * np.sin(2.0 * np.pi * (np.asarray(z) + 1.0))


def g2(z):
    u = np.asarray(z) + 1.0
    return 100.0 * (np.exp(-1.625 * u) - 4.0 * np.exp(-3.25 * u) + 3.0 * np.exp(-4.875 * u)) - C0


def _cubic1(z):
    z = np.asarray(z)
    return 2.0 * z**3 - z


def _cubic2(z):
    z = np.asarray(z)
    return z**2 - 1.0 / 3.0


def true_components(g_model: str):
    if g_model == "sine_exp":
        return (g1, g2)
    if g_model == "cubic":
        # polynomials of degree <= 3 lie in every cubic spline space
        return (_cubic1, _cubic2)
    raise ConfigError(f"unknown g_model {g_model!r}; choose from {G_MODELS}")


@dataclass(frozen=True)
class DgpConfig:
    """One simulation setting.

    ``beta_scheme``: ``heterogeneous`` (group j has beta j, 1-based),
    ``homogeneous`` (all groups ``beta_value``) or ``shifted`` (group 1 has
    ``beta_value + delta``, the rest ``beta_value``). ``g_shift`` adds
    ``g_shift * (Z1 + 1)`` to group 1's first component. ``intercept`` appends a
    constant column to X (true coefficient 0). It is on by default: without it
    a group's sample mean of ``g1 + g2`` (variance about 112 / n) has nowhere to
    go and inflates both the residual variance and the spread of ``beta_hat``.
    """

    N: int = 2**11
    s: int = 2**4
    beta_scheme: str = "heterogeneous"
    beta_value: float = 1.0
    delta: float = 0.0
    g_shift: float = 0.0
    sigma: float = 1.0
    seed: int = 0
    interior_knots: int = 5
    degree: int = 3
    g_model: str = "sine_exp"
    intercept: bool = True

    def __post_init__(self):
        if self.N < 1 or self.s < 1:
            raise ConfigError("N and s must be >= 1")
        if self.N % self.s:
            raise ConfigError(f"N = {self.N} is not divisible by s = {self.s}")
        if self.beta_scheme not in BETA_SCHEMES:
            raise ConfigError(f"unknown beta_scheme {self.beta_scheme!r}; choose from {BETA_SCHEMES}")
        if self.g_model not in G_MODELS:
            raise ConfigError(f"unknown g_model {self.g_model!r}; choose from {G_MODELS}")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def n(self) -> int:
        return self.N // self.s

    def beta(self, j: int) -> float:
        """True coefficient of group ``j`` (0-based)."""
        if self.beta_scheme == "heterogeneous":
            return float(j + 1)
        if self.beta_scheme == "shifted" and j == 0:
            return self.beta_value + self.delta
        return self.beta_value

    def true_beta(self, j: int) -> np.ndarray:
        b = [self.beta(j)]
        if self.intercept:
            b.append(0.0)
        return np.array(b)

    @classmethod
    def from_dict(cls, d: dict) -> "DgpConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown simulation keys: {', '.join(unknown)}")
        return cls(**d)


def generate_dataset(cfg: DgpConfig) -> Dataset:
    n = cfg.n
    comps = true_components(cfg.g_model)
    Ys, Xs, Zs, Gs = [], [], [], []
    for j in range(cfg.s):
        gen = rng.stream(cfg.seed, rng.DATA, j)
        Z = gen.uniform(-1.0, 1.0, size=(n, 2))
        W = gen.uniform(-1.0, 1.0, size=n)
        eps = gen.standard_normal(n) * cfg.sigma
        x = 0.5 * (W + Z[:, 0])
        g = comps[0](Z[:, 0]) + comps[1](Z[:, 1])
        if j == 0 and cfg.g_shift:
            g = g + cfg.g_shift * (Z[:, 0] + 1.0)
        Ys.append(x * cfg.beta(j) + g + eps)
        Xs.append(np.column_stack([x, np.ones(n)]) if cfg.intercept else x.reshape(-1, 1))
        Zs.append(Z)
        Gs.append(np.full(n, j + 1))
    x_names = ["x", "intercept"] if cfg.intercept else ["x"]
    return Dataset(np.concatenate(Ys), np.vstack(Xs), np.vstack(Zs), np.concatenate(Gs),
                   x_names, ["z1", "z2"], "y")


# --------------------------------------------------------------------------
# Monte Carlo harness


@dataclass(frozen=True)
class ExperimentOptions:
    """What each replication computes.

    ``bootstrap_B = 0`` skips both bootstrap tests; ``true_matrices`` uses the
    population D = 1/12 and A = 1/6 in the intervals instead of the group
    estimates.
    """

    alpha: float = 0.05
    level: float = 0.95
    wald: bool = True
    bootstrap_B: int = 0
    bootstrap_max: bool = False
    lrt: bool = True
    lrt_joint: bool = False
    lrt_recenter: bool = True
    true_matrices: bool = False
    rmse_single: bool = False
    grid_points: int = 200

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentOptions":
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown experiment option keys: {', '.join(unknown)}")
        return cls(**d)


def _rmse_pair(component_fn, config, dataset, comps, grid_points):
    """Empirical-norm and grid RMSE of an additive estimate against the truth.

    Both sides are centered over the pooled sample, so a constant offset in the
    centering convention is not counted as error.
    """
    Z = dataset.Z
    K = Z.shape[1]
    truth = np.column_stack([comps[k](Z[:, k]) for k in range(K)])
    tmean = truth.mean(axis=0)
    est = component_fn(Z)
    err = (est - (truth - tmean)).sum(axis=1)
    rmse_emp = float(np.sqrt(np.mean(err**2)))

    u = np.linspace(0.0, 1.0, grid_points)
    Zg = np.column_stack([t.inverse(u) for t in config.transforms])
    eg = component_fn(Zg) - (np.column_stack([comps[k](Zg[:, k]) for k in range(K)]) - tmean)
    m1 = eg.mean(axis=0)
    m2 = (eg**2).mean(axis=0)
    # mean square over the K-fold product grid of an additive error
    ms = m2.sum() + (m1.sum() ** 2 - (m1**2).sum())
    return rmse_emp, float(np.sqrt(max(ms, 0.0)))


def _covers(ci, value, tol=1e-9):
    """Coverage of the first coefficient; a zero-width interval counts an exact hit."""
    return bool(abs(ci.center[0] - value) <= ci.halfwidth[0] + tol * max(1.0, abs(value)))


def run_replication(cfg: DgpConfig, options: ExperimentOptions = ExperimentOptions()) -> dict:
    """Fit, aggregate, boost and test one simulated dataset; returns a metrics row."""
    data = generate_dataset(cfg)
    res = fit_divide_and_conquer(data, cfg.degree, cfg.interior_knots)
    comps = true_components(cfg.g_model)
    fits, agg, s2 = res.fits, res.agg, res.sigma2_bar
    row = {"sigma2_bar": s2}

    row["rmse_gbar"], row["rmse_gbar_grid"] = _rmse_pair(
        agg.component_values, res.config, data, comps, options.grid_points)
    if options.rmse_single:
        singles = []
        for f in fits:
            c = whole_sample_constants(f, agg.pooled_means)
            singles.append(_rmse_pair(lambda Z, f=f, c=c: f.component_values(Z, c), res.config,
                                      data, comps, options.grid_points)[0])
        row["rmse_single_min"] = float(min(singles))
        row["rmse_single_first"] = float(singles[0])

    f1 = fits[0]
    b_true = cfg.true_beta(0)
    d = b_true.shape[0]
    breve1 = res.beta_breve(0)
    row["beta_hat1"] = float(f1.beta_hat[0])
    row["beta_breve1"] = float(breve1[0])
    row["D_hat1"] = float(f1.D_hat[0, 0])
    row["A_hat1"] = float(f1.A_hat[0, 0])
    Dm = np.eye(d) * TRUE_D if options.true_matrices else f1.D_hat
    Am = np.eye(d) * TRUE_A if options.true_matrices else f1.A_hat
    try:
        ci1 = ci_beta(f1.beta_hat, Dm, s2, f1.n, options.level, "CI1_Dbased")
        ci2 = ci_beta(breve1, Am, s2, f1.n, options.level, "CI2_Abased")
        row["cover_ci1"] = _covers(ci1, b_true[0])
        row["cover_ci2"] = _covers(ci2, b_true[0])
        row["len_ci1"] = float(ci1.length[0])
        row["len_ci2"] = float(ci2.length[0])
    except DcaplmError:
        pass

    Q = np.eye(d)[:1]
    if options.wald and len(fits) >= 2:
        f2 = fits[1]
        try:
            row["reject_psi1"] = wald_pairwise(f1.beta_hat, f2.beta_hat, Q, (f1.D_hat, f2.D_hat), s2,
                                               (f1.n, f2.n), options.alpha, "Psi1").reject
            row["reject_psi2"] = wald_pairwise(breve1, res.beta_breve(1), Q, (f1.A_hat, f2.A_hat), s2,
                                               (f1.n, f2.n), options.alpha, "Psi2").reject
        except DcaplmError:
            pass
    if options.bootstrap_B and len(fits) >= 2:
        X_list = [p.X for p in res.partitions]
        breve = np.array([res.beta_breve(j) for j in range(len(fits))])
        boot_seed = rng.derive_seed(cfg.seed, 7)
        try:
            t = bootstrap_consecutive_test(breve, Q, X_list, s2, options.bootstrap_B, options.alpha,
                                           boot_seed)
            row["reject_boot_consec"] = t.reject
            row["stat_boot_consec"] = t.statistic
            if options.bootstrap_max:
                nulls = np.array([cfg.true_beta(j) for j in range(len(fits))])
                row["reject_boot_max"] = bootstrap_max_test(
                    breve, nulls, Q, X_list, s2, options.bootstrap_B, options.alpha, boot_seed).reject
        except DcaplmError:
            pass
    if options.lrt and len(fits) >= 2:
        try:
            t = lrt_homogeneity_component(res.partitions, fits, 0, s2, options.alpha, options.lrt_recenter)
            row["reject_lrt"] = t.reject
            row["stat_lrt"] = t.statistic
            row["dof_lrt"] = t.dof_or_B
            if options.lrt_joint:
                tj = lrt_homogeneity_joint(res.partitions, fits, s2, options.alpha, options.lrt_recenter)
                row["reject_lrt_joint"] = tj.reject
                row["stat_lrt_joint"] = tj.statistic
        except DcaplmError:
            pass
    return row


@dataclass
class ExperimentReport:
    """Summary of all replications of one grid point."""

    config: dict
    options: dict
    replications: int
    failures: int
    metrics: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def __getattr__(self, name):
        metrics = self.__dict__.get("metrics", {})
        if name in metrics:
            return metrics[name]
        raise AttributeError(name)

    def to_row(self) -> dict:
        out = {f"cfg_{k}": v for k, v in self.config.items()}
        out["replications"] = self.replications
        out["failures"] = self.failures
        out.update(self.metrics)
        return out


_MEAN_KEYS = {
    "rmse_gbar": "rmse_gbar",
    "rmse_gbar_grid": "rmse_gbar_grid",
    "cover_ci1": "coverage_ci1",
    "cover_ci2": "coverage_ci2",
    "len_ci1": "mean_len_ci1",
    "len_ci2": "mean_len_ci2",
    "reject_psi1": "rate_psi1",
    "reject_psi2": "rate_psi2",
    "reject_boot_consec": "rate_boot_consec",
    "reject_boot_max": "rate_boot_max",
    "reject_lrt": "rate_lrt",
    "reject_lrt_joint": "rate_lrt_joint",
    "stat_lrt": "mean_stat_lrt",
    "stat_lrt_joint": "mean_stat_lrt_joint",
    "sigma2_bar": "mean_sigma2_bar",
    "D_hat1": "mean_D_hat1",
    "A_hat1": "mean_A_hat1",
}


def summarize(rows) -> dict:
    m = {}
    for key, name in _MEAN_KEYS.items():
        vals = [float(r[key]) for r in rows if key in r]
        if vals:
            m[name] = float(np.mean(vals))
    for key in ("rmse_gbar", "rmse_gbar_grid"):
        vals = [r[key] for r in rows if key in r]
        if vals:
            m[f"median_{key}"] = float(np.median(vals))
    if "rmse_single_min" in (rows[0] if rows else {}):
        m["frac_gbar_beats_all_single"] = float(np.mean([r["rmse_gbar"] < r["rmse_single_min"] for r in rows]))
    for key in ("beta_hat1", "beta_breve1"):
        vals = [r[key] for r in rows if key in r]
        if len(vals) > 1:
            m[f"var_{key}"] = float(np.var(vals, ddof=1))
    if "var_beta_hat1" in m and m["var_beta_hat1"] > 0:
        m["var_ratio_breve_hat"] = m["var_beta_breve1"] / m["var_beta_hat1"]
    if "mean_len_ci1" in m and m["mean_len_ci1"] > 0:
        m["len_ratio_ci2_ci1"] = m["mean_len_ci2"] / m["mean_len_ci1"]
    dofs = [r["dof_lrt"] for r in rows if "dof_lrt" in r]
    if dofs:
        m["lrt_dof"] = float(dofs[0])
    return m


def _replicate(args):
    cfg, rep, options = args
    rcfg = replace(cfg, seed=rng.derive_seed(cfg.seed, rep))
    try:
        return run_replication(rcfg, options), None
    except DcaplmError as exc:
        return None, f"replication {rep}: {type(exc).__name__}: {exc}"


def run_experiment(grid, replications: int, options: ExperimentOptions = ExperimentOptions(),
                   threads: int = 1, keep_rows: bool = False):
    """Yield one :class:`ExperimentReport` per grid point.

    Replication ``r`` of a grid point uses seed ``derive_seed(cfg.seed, r)``;
    replications run on ``threads`` workers and are reduced in index order, so
    the reports do not depend on ``threads``. Fit errors are recorded per
    replication and do not stop the grid.
    """
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    for cfg in grid:
        tasks = [(cfg, r, options) for r in range(replications)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_replicate, tasks))
        else:
            results = [_replicate(t) for t in tasks]
        rows = [r for r, _ in results if r is not None]
        errors = [e for _, e in results if e is not None]
        yield ExperimentReport(
            config=asdict(cfg),
            options=asdict(options),
            replications=replications,
            failures=len(errors),
            metrics=summarize(rows),
            rows=rows if keep_rows else [],
            errors=errors,
        )


def power_of_two_grid(N_values=(2**11, 2**12, 2**13), knots=(5,), seed=0, gammas=None):
    """Settings ``s = N^(1 - gamma)`` rounded to a power of two dividing N."""
    grid = []
    for N in N_values:
        logN = math.log2(N)
        for J in knots:
            q = math.log(J) / math.log(N)
            gs = gammas or [g / 10 for g in range(max(4, math.ceil(20 * q)), 11)]
            seen = set()
            for gamma in gs:
                s = 2 ** int(round((1 - gamma) * logN))
                if s in seen or N % s:
                    continue
                seen.add(s)
                grid.append(DgpConfig(N=N, s=s, interior_knots=J, seed=seed))
    return grid
