"""End-to-end pipeline: configuration, CSV ingestion, fitting, testing and
artifact emission.

Artifacts written by :func:`run_pipeline` into the output directory:

``fits.csv``       one row per group: n, sigma2_hat, beta_hat and beta_breve
``gbar_grid.csv``  the aggregated components on 200 points per covariate
``tests.json``     one entry per test, each with a ``status`` field
``model.json``     the fitted state, reloadable by :func:`run_tests_from_model`
``manifest.json``  config echo, seed, versions, timing and a sha256 per artifact

Every artifact except the manifest is a pure function of the config and seed;
the manifest also records wall-clock timings.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .aggregate import AggregatedFit
from .data import Dataset
from .divide_conquer import fit_divide_and_conquer
from .errors import ConfigError, DataError, EmptyDatasetError, NumericalError
from .hypothesis_tests import (
    bootstrap_consecutive_test,
    bootstrap_max_test,
    lrt_homogeneity_component,
    lrt_homogeneity_joint,
    wald_pairwise,
)
from .inference import ci_beta
from .simulation import DgpConfig, ExperimentOptions, generate_dataset, power_of_two_grid, run_experiment
from .spline_basis import SplineConfig
from .subpop import SubPopFit

log = logging.getLogger(__name__)

GRID_POINTS = 200
TEST_NAMES = ("wald", "bootstrap", "bootstrap_max", "lrt", "lrt_joint")
DEFAULT_TESTS = ("wald", "bootstrap", "lrt", "lrt_joint")


@dataclass
class PipelineConfig:
    """Validated run configuration.

    Exactly one of ``input`` (CSV path) and ``simulation`` (a dict of
    :class:`DgpConfig` fields, optionally with ``"preset"``) is set. With a
    simulation source the column roles default to ``y``, ``x``, ``z1``, ``z2``
    and ``group``.
    """

    input: str | None = None
    simulation: dict | None = None
    response: str | None = None
    linear: list = field(default_factory=list)
    spline: list = field(default_factory=list)
    group: str | None = None
    degree: int = 3
    interior_knots: int = 5
    weights: str = "uniform"
    homogeneous: bool = False
    intercept: bool = False
    log10: list = field(default_factory=list)
    minmax: list = field(default_factory=list)
    tests: list = field(default_factory=lambda: list(DEFAULT_TESTS))
    alpha: float = 0.05
    B: int = 500
    level: float = 0.95
    wald_pair: list | None = None
    bootstrap_null: list | None = None
    lrt_recenter: bool = True
    model: str | None = None
    experiment: dict | None = None
    out: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.input is not None and self.simulation is not None:
            raise ConfigError("set only one of 'input' and 'simulation'")
        if self.simulation is not None:
            self.response = self.response or "y"
            self.linear = list(self.linear) or (["x", "intercept"] if self.simulation.get("intercept", True) else ["x"])
            self.spline = list(self.spline) or ["z1", "z2"]
            self.group = self.group or "group"
        self.linear = list(self.linear)
        self.spline = list(self.spline)
        if self.input is not None:
            if not self.response or self.group is None:
                raise ConfigError("a CSV input needs 'response' and 'group' columns")
            if not self.spline:
                raise ConfigError("at least one spline column is required")
            if not self.linear and not self.intercept:
                raise ConfigError("at least one linear column (or intercept) is required")
            roles = [self.response, *self.linear, *self.spline, self.group]
            dup = sorted({c for c in roles if roles.count(c) > 1})
            if dup:
                raise ConfigError(f"columns assigned to more than one role: {', '.join(dup)}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level!r}")
        if int(self.B) != self.B or self.B < 100:
            raise ConfigError(f"B must be an integer >= 100, got {self.B!r}")
        if self.degree < 1 or self.interior_knots < 0:
            raise ConfigError("degree must be >= 1 and interior_knots >= 0")
        if self.weights not in ("uniform", "by_size"):
            raise ConfigError(f"weights must be 'uniform' or 'by_size', got {self.weights!r}")
        unknown = sorted(set(self.tests) - set(TEST_NAMES))
        if unknown:
            raise ConfigError(f"unknown tests: {', '.join(unknown)}; choose from {', '.join(TEST_NAMES)}")
        if "bootstrap_max" in self.tests and self.bootstrap_null is None:
            raise ConfigError("the bootstrap_max test needs 'bootstrap_null'")
        if self.wald_pair is not None and len(self.wald_pair) != 2:
            raise ConfigError("wald_pair must name exactly two groups")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def parse_config(source) -> PipelineConfig:
    """Read a JSON config from a path (or a dict) and apply defaults."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {str(path)!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return PipelineConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# ingestion


@dataclass
class IngestionReport:
    rows_read: int
    rows_dropped: int
    groups: dict

    @property
    def rows_used(self) -> int:
        return self.rows_read - self.rows_dropped

    def to_dict(self) -> dict:
        return {"rows_read": self.rows_read, "rows_dropped": self.rows_dropped,
                "rows_used": self.rows_used, "groups": self.groups}


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def ingest_csv(path, config: PipelineConfig):
    """Parse ``path`` into a :class:`Dataset` and an :class:`IngestionReport`.

    Non-numeric or non-finite values (including after the ``log10`` transform)
    and blank group labels drop their row; ``minmax`` columns are rescaled to
    [0, 1] over the kept rows.
    """
    numeric = [config.response, *config.linear, *config.spline]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read input {str(path)!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError(f"input {str(path)!r} is empty") from None
        for col in [*numeric, config.group, *config.log10, *config.minmax]:
            if col not in header:
                raise DataError(f"column {col!r} not found in {str(path)!r}")
        idx = {c: header.index(c) for c in header}
        cols = {c: [] for c in numeric}
        labels = []
        read = 0
        for row in reader:
            if not row:
                continue
            read += 1
            if len(row) != len(header):
                continue
            vals = {c: _to_float(row[idx[c]]) for c in numeric}
            for c in config.log10:
                v = vals[c]
                vals[c] = math.log10(v) if v > 0 else math.nan
            label = row[idx[config.group]].strip()
            if not label or not all(math.isfinite(v) for v in vals.values()):
                continue
            for c in numeric:
                cols[c].append(vals[c])
            labels.append(label)
    if not labels:
        raise EmptyDatasetError(f"no usable rows in {str(path)!r} ({read} read)")
    arr = {c: np.array(v, dtype=np.float64) for c, v in cols.items()}
    for c in config.minmax:
        lo, hi = arr[c].min(), arr[c].max()
        if hi <= lo:
            raise DataError(f"column {c!r} is constant; cannot min-max rescale")
        arr[c] = (arr[c] - lo) / (hi - lo)
    n = len(labels)
    X = np.column_stack([arr[c] for c in config.linear]) if config.linear else np.empty((n, 0))
    x_names = list(config.linear)
    if config.intercept:
        X = np.column_stack([X, np.ones(n)])
        x_names.append("intercept")
    ds = Dataset(arr[config.response], X, np.column_stack([arr[c] for c in config.spline]),
                 np.array(labels, dtype=object), x_names, list(config.spline), config.response)
    sizes = {str(g): int(np.count_nonzero(ds.groups == g)) for g in ds.group_labels()}
    report = IngestionReport(read, read - n, sizes)
    if report.rows_dropped:
        log.warning("dropped %d of %d rows with missing or non-finite values", report.rows_dropped, read)
    return ds, report


SIM_PRESETS = {
    "desk": {},
    "N11_s16": {"N": 2**11, "s": 2**4},
    "N12_s16": {"N": 2**12, "s": 2**4},
    "N13_s32_J4": {"N": 2**13, "s": 2**5, "interior_knots": 4},
}


def simulation_config(config: PipelineConfig) -> DgpConfig:
    overrides = dict(config.simulation)
    preset = overrides.pop("preset", "desk")
    if preset not in SIM_PRESETS:
        raise ConfigError(f"unknown simulation preset {preset!r}; choose from {', '.join(SIM_PRESETS)}")
    merged = {"degree": config.degree, "interior_knots": config.interior_knots, "seed": config.seed}
    merged.update(SIM_PRESETS[preset])
    merged.update(overrides)
    return DgpConfig.from_dict(merged)


def load_dataset(config: PipelineConfig):
    if config.simulation is not None:
        dgp = simulation_config(config)
        ds = generate_dataset(dgp)
        sizes = {str(g): dgp.n for g in ds.group_labels()}
        return ds, IngestionReport(ds.N, 0, sizes), dgp
    if config.input is None:
        raise ConfigError("config needs an 'input' CSV path or a 'simulation' block")
    ds, report = ingest_csv(config.input, config)
    return ds, report, None


# --------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def _label(g):
    return g.item() if isinstance(g, np.generic) else g


class ArtifactWriter:
    """Single writer of output files; remembers each file's hash for the manifest."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = {}

    def write(self, name: str, text: str):
        data = text.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.artifacts[name] = {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}

    def manifest(self, command, config, seed, threads, timing, extra=None):
        m = {
            "command": command,
            "config": config.to_dict(),
            "seed": seed,
            "threads": threads,
            "timing_seconds": timing,
            "versions": {
                "dcaplm": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "kernel_backend": kernels.BACKEND,
            },
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        if extra:
            m.update(extra)
        (self.out / "manifest.json").write_text(_json_text(m), encoding="utf-8")
        return m


def fits_csv(res, x_names) -> str:
    xn = list(x_names)
    header = ["group", "n", "sigma2_hat", "rss"] + [f"beta_hat_{c}" for c in xn] + [f"beta_breve_{c}" for c in xn]
    rows = []
    for j, f in enumerate(res.fits):
        rows.append([_label(f.group_id), f.n, f.sigma2_hat, f.rss, *f.beta_hat, *res.beta_breve(j)])
    return _csv_text(header, rows)


def gbar_grid_csv(agg: AggregatedFit, points: int = GRID_POINTS) -> str:
    cfg = agg.config
    u = np.linspace(0.0, 1.0, points)
    Zg = np.column_stack([t.inverse(u) for t in cfg.transforms])
    vals = agg.component_values(Zg)
    rows = []
    for k, name in enumerate(cfg.names):
        for i in range(points):
            rows.append([name, i, u[i], Zg[i, k], vals[i, k]])
    return _csv_text(["component", "index", "unit", "value", "gbar"], rows)


# --------------------------------------------------------------------------
# tests


def _entry(name, fn):
    try:
        r = fn()
    except (NumericalError, ConfigError) as exc:
        return {"name": name, "status": "error", "error_type": type(exc).__name__, "error": str(exc)}
    d = r.to_dict()
    d["name"] = name
    d["status"] = "ok"
    return d


def _group_index(fits, label):
    ids = [str(_label(f.group_id)) for f in fits]
    if str(label) not in ids:
        raise ConfigError(f"group {label!r} not found; available: {', '.join(ids[:10])}")
    return ids.index(str(label))


def run_tests(config: PipelineConfig, parts, fits, agg, sigma2: float, threads: int = 1) -> dict:
    """All configured tests; numerical failures become entries with status ``error``."""
    out = []
    d = fits[0].d
    Q = np.eye(d)[:1]
    s = len(fits)
    breve = np.array([agg.beta_breve[f.group_id] for f in fits])
    if "wald" in config.tests and s >= 2:
        if config.wald_pair is None:
            a, b = 0, 1
        else:
            a, b = (_group_index(fits, g) for g in config.wald_pair)
        fa, fb = fits[a], fits[b]
        out.append(_entry("Psi1", lambda: wald_pairwise(
            fa.beta_hat, fb.beta_hat, Q, (fa.D_hat, fb.D_hat), sigma2, (fa.n, fb.n), config.alpha, "Psi1")))
        out.append(_entry("Psi2", lambda: wald_pairwise(
            breve[a], breve[b], Q, (fa.A_hat, fb.A_hat), sigma2, (fa.n, fb.n), config.alpha, "Psi2")))
        for e in out[-2:]:
            e["groups"] = [_label(fa.group_id), _label(fb.group_id)]
    X_list = [p.X for p in parts]
    if "bootstrap" in config.tests and s >= 2:
        out.append(_entry("BootstrapConsecutive", lambda: bootstrap_consecutive_test(
            breve, Q, X_list, sigma2, config.B, config.alpha, config.seed, threads)))
    if "bootstrap_max" in config.tests:
        nulls = np.broadcast_to(np.asarray(config.bootstrap_null, dtype=np.float64), breve.shape)
        out.append(_entry("BootstrapMax", lambda: bootstrap_max_test(
            breve, nulls, Q, X_list, sigma2, config.B, config.alpha, config.seed, threads)))
    if "lrt" in config.tests and s >= 2:
        for k, name in enumerate(fits[0].config.names):
            e = _entry("LRT_component", lambda k=k: lrt_homogeneity_component(
                parts, fits, k, sigma2, config.alpha, config.lrt_recenter))
            e["component"] = name
            out.append(e)
    if "lrt_joint" in config.tests and s >= 2:
        out.append(_entry("LRT_joint", lambda: lrt_homogeneity_joint(
            parts, fits, sigma2, config.alpha, config.lrt_recenter)))
    intervals = []
    for j, f in enumerate(fits):
        row = {"group": _label(f.group_id)}
        for variant, center, M in (("CI1_Dbased", f.beta_hat, f.D_hat), ("CI2_Abased", breve[j], f.A_hat)):
            try:
                ci = ci_beta(center, M, sigma2, f.n, config.level, variant)
                row[variant] = {"lower": ci.lower.tolist(), "upper": ci.upper.tolist(), "status": "ok"}
            except NumericalError as exc:
                row[variant] = {"status": "error", "error": str(exc)}
        intervals.append(row)
    return {"alpha": config.alpha, "sigma2_bar": sigma2, "groups": s, "tests": out,
            "confidence_intervals": {"level": config.level, "groups": intervals}}


# --------------------------------------------------------------------------
# entry points


def _config_with(config: PipelineConfig, seed=None, threads=None, out=None) -> PipelineConfig:
    updates = {k: v for k, v in (("seed", seed), ("threads", threads), ("out", out)) if v is not None}
    if not updates:
        return config
    return replace(config, **updates)


def model_dict(res, x_names) -> dict:
    return {
        "spline": res.config.to_dict(),
        "x_names": list(x_names),
        "fits": [f.to_dict() for f in res.fits],
        "aggregate": res.agg.to_dict(),
        "sigma2_bar": res.sigma2_bar,
    }


def run_pipeline(config: PipelineConfig, seed=None, threads=None, out=None) -> dict:
    """Ingest, fit, aggregate, boost, test and write all artifacts.

    Returns the manifest dict. Group fit failures propagate (naming the group).
    """
    config = _config_with(config, seed, threads, out)
    t0 = time.perf_counter()
    ds, report, _ = load_dataset(config)
    t1 = time.perf_counter()
    res = fit_divide_and_conquer(ds, config.degree, config.interior_knots, config.weights,
                                 config.homogeneous, config.threads)
    t2 = time.perf_counter()
    tests = run_tests(config, res.partitions, res.fits, res.agg, res.sigma2_bar, config.threads)
    if config.homogeneous:
        tests["beta_bar"] = res.agg.beta_bar.tolist()
    t3 = time.perf_counter()
    w = ArtifactWriter(config.out)
    w.write("fits.csv", fits_csv(res, ds.x_names))
    w.write("gbar_grid.csv", gbar_grid_csv(res.agg))
    w.write("tests.json", _json_text(tests))
    w.write("model.json", _json_text(model_dict(res, ds.x_names)))
    timing = {"ingest": t1 - t0, "fit": t2 - t1, "tests": t3 - t2, "total": time.perf_counter() - t0}
    return w.manifest("fit", config, config.seed, config.threads, timing,
                      {"ingestion": report.to_dict()})


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read model {str(path)!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model {str(path)!r} is not valid JSON: {exc}") from exc
    cfg = SplineConfig.from_dict(d["spline"])
    fits = [SubPopFit.from_dict(f, cfg) for f in d["fits"]]
    agg = AggregatedFit.from_dict(d["aggregate"], cfg)
    return cfg, fits, agg, float(d["sigma2_bar"])


def run_tests_from_model(config: PipelineConfig, model=None, seed=None, threads=None, out=None) -> dict:
    """Re-run the tests on saved fits and the data they came from."""
    config = _config_with(config, seed, threads, out)
    path = model or config.model
    if path is None:
        raise ConfigError("the test command needs a saved model ('model' key or --model)")
    t0 = time.perf_counter()
    cfg, fits, agg, sigma2 = load_model(path)
    ds, report, _ = load_dataset(config)
    parts = ds.partitions()
    ids = [str(_label(f.group_id)) for f in fits]
    if [str(_label(p.group_id)) for p in parts] != ids:
        raise DataError("the data's groups do not match the saved fits")
    for p, f in zip(parts, fits):
        if p.n != f.n:
            raise DataError(f"group {f.group_id!r} has {p.n} rows but was fitted on {f.n}")
    agg.beta_breve = {f.group_id: agg.beta_breve.get(f.group_id, agg.beta_breve.get(str(f.group_id)))
                      for f in fits}
    tests = run_tests(config, parts, fits, agg, sigma2, config.threads)
    w = ArtifactWriter(config.out)
    w.write("tests.json", _json_text(tests))
    return w.manifest("test", config, config.seed, config.threads,
                      {"total": time.perf_counter() - t0}, {"ingestion": report.to_dict(), "model": str(path)})


EXPERIMENT_KEYS = {"preset", "grid", "replications", "options"}


def experiment_grid(config: PipelineConfig):
    block = dict(config.experiment or {})
    unknown = sorted(set(block) - EXPERIMENT_KEYS)
    if unknown:
        raise ConfigError(f"unknown experiment keys: {', '.join(unknown)}")
    reps = int(block.get("replications", 100))
    options = ExperimentOptions.from_dict(dict({"alpha": config.alpha, "level": config.level,
                                                "lrt_recenter": config.lrt_recenter},
                                               **block.get("options", {})))
    if "grid" in block:
        grid = []
        for g in block["grid"]:
            g = dict({"seed": config.seed, "degree": config.degree,
                      "interior_knots": config.interior_knots}, **g)
            grid.append(DgpConfig.from_dict(g))
    else:
        preset = block.get("preset", "desk")
        if preset == "desk":
            grid = power_of_two_grid((2**11, 2**12, 2**13), (config.interior_knots,), config.seed)
        elif preset == "full":
            grid = power_of_two_grid((2**11, 2**12, 2**13, 2**14), (config.interior_knots,), config.seed)
        else:
            raise ConfigError(f"unknown experiment preset {preset!r}; choose 'desk' or 'full'")
    return grid, reps, options


def run_simulation(config: PipelineConfig, seed=None, threads=None, out=None) -> dict:
    """Monte Carlo grid; writes ``report.csv`` (one row per grid point) and ``report.json``."""
    config = _config_with(config, seed, threads, out)
    grid, reps, options = experiment_grid(config)
    t0 = time.perf_counter()
    reports = list(run_experiment(grid, reps, options, config.threads))
    rows = [r.to_row() for r in reports]
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    w = ArtifactWriter(config.out)
    w.write("report.csv", _csv_text(header, [[r.get(k, "") for k in header] for r in rows]))
    w.write("report.json", _json_text([
        {"config": r.config, "options": r.options, "replications": r.replications,
         "failures": r.failures, "metrics": r.metrics, "errors": r.errors} for r in reports]))
    return w.manifest("simulate", config, config.seed, config.threads,
                      {"total": time.perf_counter() - t0})

