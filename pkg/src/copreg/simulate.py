"""Convergence experiments for the empirical checkerboard estimators of mean
and quantile regression, plus density/step-function emission for figure
reproduction.

Every run is deterministic given the seed: replication r uses the stream
(seed, stream_index=r), rows are written sorted by (n, rep), and parallel
and serial execution produce identical files.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import checkerboard as cb
from . import families
from . import regression as reg
from .errors import ConfigError, PreconditionError
from .numerics import QuadratureSpec, RngStream

__all__ = [
    "ExperimentConfig",
    "ErrorRow",
    "ErrorTable",
    "SummaryRow",
    "resolution_for",
    "run_convergence",
    "summarize_boxplot",
    "write_errors_csv",
    "write_boxplot_csv",
    "emit_density",
    "load_sample_csv",
]

_SUBCELLS = 32  # truth midpoints per estimator piece in L1 integration


def resolution_for(n: int, s: float) -> int:
    """Checkerboard resolution N(n) = floor(n^s)."""
    return int(math.floor(n ** s))


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of a convergence study."""

    family: str
    sizes: tuple
    reps: int
    s: float = 0.4
    tau_list: tuple = (0.2,)
    seed: int = 42
    cells: int = 4096
    jobs: int = 1
    timing: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 0.5:
            raise ConfigError(f"s must lie in (0, 1/2), got {self.s}")
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise ConfigError(f"sizes must be positive, got {sizes}")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"sizes must be strictly increasing, got {sizes}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        for t in self.tau_list:
            if not 0.0 < t < 1.0:
                raise ConfigError(f"tau levels must lie in (0,1), got {t}")
        for n in sizes:
            if resolution_for(n, self.s) < 1:
                raise ConfigError(f"n={n} too small for s={self.s}: N < 1")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "tau_list", tuple(float(t) for t in self.tau_list))


@dataclass(frozen=True)
class ErrorRow:
    n: int
    rep: int
    estimator: str        # "mean" or "quantile"
    tau: Optional[float]  # None for the mean estimator
    resolution: int
    l1_error: float
    seconds: float


@dataclass
class ErrorTable:
    rows: list = field(default_factory=list)

    def medians(self) -> dict:
        """Median L1 error per (n, estimator, tau)."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.n, r.estimator, r.tau), []).append(r.l1_error)
        return {k: float(np.median(v)) for k, v in groups.items()}


def _truth_tables(model, sizes, s, tau_list, cells):
    """True r and Q^tau on the sub-midpoint grids of each size's estimator
    pieces; shared across replications."""
    quad = QuadratureSpec(cells)
    out = {}
    for n in sizes:
        res = resolution_for(n, s)
        xs = ((np.arange(res)[:, None]
               + (np.arange(_SUBCELLS) + 0.5)[None, :] / _SUBCELLS) / res).ravel()
        mean_vals = np.asarray(reg.regression_values(model, xs, quad))
        q_vals = {t: np.asarray(reg.quantile_values(model, xs, t)) for t in tau_list}
        out[n] = (res, mean_vals.reshape(res, _SUBCELLS),
                  {t: v.reshape(res, _SUBCELLS) for t, v in q_vals.items()})
    return out


def _run_rep(family_spec, n, rep, seed, s, tau_list, truth):
    t0 = time.perf_counter()
    model = families.parse_family(family_spec)
    res, truth_mean, truth_q = truth
    pts = families.sample(model, n, RngStream(seed, rep))
    grid = cb.empirical_checkerboard(cb.pseudo_ranks(pts), res)
    results = []
    est_mean = cb.grid_regression_values(grid)
    results.append(("mean", None,
                    float(np.abs(est_mean[:, None] - truth_mean).mean())))
    for t in tau_list:
        est_q = cb.grid_quantile_values(grid, t)
        results.append(("quantile", t,
                        float(np.abs(est_q[:, None] - truth_q[t]).mean())))
    return n, rep, res, results, time.perf_counter() - t0


def run_convergence(config: ExperimentConfig,
                    data: Optional[np.ndarray] = None) -> ErrorTable:
    """Sample, estimate, and integrate L1 errors for every (n, rep) pair.

    With ``data`` (a fixed sample), reps must be 1 and each size uses the
    first n rows, since file data admits no replication randomness.
    """
    model = families.parse_family(config.family)
    if model.covariate_dim != 1:
        raise ConfigError("convergence experiments are bivariate; "
                          f"{config.family!r} has 2-d covariates")
    truth = _truth_tables(model, config.sizes, config.s, config.tau_list,
                          config.cells)
    if data is not None:
        if config.reps != 1:
            raise ConfigError("fixed data admits no replications; use reps=1")
        if len(data) < config.sizes[-1]:
            raise ConfigError(f"data has {len(data)} rows, need {config.sizes[-1]}")
    tasks = [(n, rep) for n in config.sizes for rep in range(1, config.reps + 1)]
    rows = []
    if data is not None:
        for n, rep in tasks:
            t0 = time.perf_counter()
            res, truth_mean, truth_q = truth[n]
            grid = cb.empirical_checkerboard(cb.pseudo_ranks(data[:n]), res)
            est_mean = cb.grid_regression_values(grid)
            rows.append(ErrorRow(n, rep, "mean", None, res,
                                 float(np.abs(est_mean[:, None] - truth_mean).mean()),
                                 time.perf_counter() - t0))
            for t in config.tau_list:
                est_q = cb.grid_quantile_values(grid, t)
                rows.append(ErrorRow(n, rep, "quantile", t, res,
                                     float(np.abs(est_q[:, None] - truth_q[t]).mean()),
                                     0.0))
        return ErrorTable(rows)

    args = [(config.family, n, rep, config.seed, config.s, config.tau_list,
             truth[n]) for n, rep in tasks]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_rep_star, args, chunksize=4))
    else:
        outcomes = [_run_rep(*a) for a in args]
    outcomes.sort(key=lambda o: (o[0], o[1]))
    for n, rep, res, results, secs in outcomes:
        for estimator, tau, err in results:
            rows.append(ErrorRow(n, rep, estimator, tau, res, err, secs))
    return ErrorTable(rows)


def _run_rep_star(a):
    return _run_rep(*a)


# ---------------------------------------------------------------------------
# Boxplot summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    n: int
    estimator: str
    tau: Optional[float]
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def summarize_boxplot(table: ErrorTable) -> list:
    """Five-number-plus-mean summary per (n, estimator, tau); quartiles by
    linear interpolation of order statistics (inclusive convention)."""
    if not table.rows:
        raise PreconditionError("cannot summarize an empty error table")
    groups: dict = {}
    for r in table.rows:
        groups.setdefault((r.n, r.estimator, r.tau), []).append(r.l1_error)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], -1.0 if k[2] is None else k[2])):
        # sort before reducing so summaries are bitwise invariant under
        # permutations of the replication order
        vals = np.sort(np.asarray(groups[key]))
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0], method="linear")
        out.append(SummaryRow(key[0], key[1], key[2], float(vals.min()),
                              float(q1), float(med), float(q3),
                              float(vals.max()), float(vals.mean())))
    return out


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_errors_csv(table: ErrorTable, path, timing: bool = False) -> None:
    """errors.csv: n,rep,estimator,tau,N,l1_error,seconds.

    The seconds column is 0 unless timing was requested: measured wall time
    would break the byte-identical-output determinism contract.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "rep", "estimator", "tau", "N", "l1_error", "seconds"])
        for r in table.rows:
            writer.writerow([r.n, r.rep, r.estimator,
                             "" if r.tau is None else _fmt(r.tau),
                             r.resolution, _fmt(r.l1_error),
                             _fmt(r.seconds) if timing else "0"])


def write_boxplot_csv(rows: Sequence[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "estimator", "tau", "min", "q1", "median",
                         "q3", "max", "mean"])
        for r in rows:
            writer.writerow([r.n, r.estimator,
                             "" if r.tau is None else _fmt(r.tau),
                             _fmt(r.min), _fmt(r.q1), _fmt(r.median),
                             _fmt(r.q3), _fmt(r.max), _fmt(r.mean)])


# ---------------------------------------------------------------------------
# Density / figure-reproduction output
# ---------------------------------------------------------------------------

def _write_xy_csv(path, xs, vals) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for x, v in zip(xs, vals):
            writer.writerow([_fmt(x), _fmt(v)])


def load_sample_csv(path) -> np.ndarray:
    """Two-column numeric CSV (header optional) -> (n, 2) sample array."""
    rows = []
    with open(path, newline="") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            try:
                rows.append((float(record[0]), float(record[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError(f"malformed sample row {record!r}")
    if not rows:
        raise ConfigError(f"no numeric rows found in {path}")
    return np.asarray(rows)


def emit_density(family_spec: str, n: int, s: float, tau: float, seed: int,
                 out_dir, resolution: Optional[int] = None,
                 data: Optional[np.ndarray] = None,
                 cells: int = 4096) -> dict:
    """Write the empirical checkerboard density (N^2 * mass, grid CSV format),
    estimated mean/quantile step functions, and dense truth curves (1024
    points) for one sample; enough to re-plot the reference figures.
    """
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0,1), got {tau}")
    model = families.parse_family(family_spec)
    if model.covariate_dim != 1:
        raise ConfigError("density emission is bivariate")
    if data is not None:
        pts = data
        n = len(pts)
    else:
        if n < 1:
            raise ConfigError(f"sample size must be >= 1, got {n}")
        pts = families.sample(model, n, RngStream(seed, 0))
    res = resolution if resolution is not None else resolution_for(n, s)
    if not 1 <= res <= n:
        raise ConfigError(f"resolution N={res} outside 1..n={n}")
    grid = cb.empirical_checkerboard(cb.pseudo_ranks(pts[:, :2]), res)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "density": out_dir / "density_grid.csv",
        "est_mean": out_dir / "est_mean.csv",
        "est_quantile": out_dir / "est_quantile.csv",
        "truth_mean": out_dir / "truth_mean.csv",
        "truth_quantile": out_dir / "truth_quantile.csv",
    }
    cb.write_grid(grid, paths["density"], values=res ** 2 * grid.mass)
    reg.write_step_csv(reg.grid_regression(grid), paths["est_mean"])
    reg.write_step_csv(reg.grid_quantile(grid, tau), paths["est_quantile"])
    xs = np.linspace(0.0, 1.0, 1024)
    quad = QuadratureSpec(cells)
    _write_xy_csv(paths["truth_mean"], xs,
                  np.asarray(reg.regression_values(model, xs, quad)))
    _write_xy_csv(paths["truth_quantile"], xs,
                  np.asarray(reg.quantile_values(model, xs, tau)))
    return {k: str(v) for k, v in paths.items()}
