"""Checkerboard grids: analytic aggregation, the empirical estimator from
pseudo-ranks, grid-based kernel evaluation, and 3-d marginalization.

A grid stores the cell masses of a copula whose density is constant on the
N^dim equal cells of [0,1]^dim.  Cells are half-open, last cell closed (a
lambda-null convention, fixed for determinism).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EvaluationError, PreconditionError
from .families import CopulaModel
from .numerics import QuadratureSpec

__all__ = [
    "CheckerboardGrid",
    "RankedSample",
    "GridCopula",
    "aggregate",
    "aggregate_quadrature_masses",
    "pseudo_ranks",
    "empirical_checkerboard",
    "grid_kernel_cdf",
    "grid_regression_values",
    "grid_quantile_values",
    "marginalize_3d",
    "write_grid",
    "read_grid",
]

_MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class CheckerboardGrid:
    """Mass array of shape (N,)*dim with total mass 1 and uniform margins:
    every axis-aligned slab of thickness one cell carries mass 1/N."""

    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim not in (2, 3):
            raise PreconditionError(f"grid dimension must be 2 or 3, got {mass.ndim}")
        n = mass.shape[0]
        if any(s != n for s in mass.shape):
            raise PreconditionError(f"grid must be square, got shape {mass.shape}")
        if (mass < -_MARGIN_TOL).any():
            raise PreconditionError("cell masses must be non-negative")
        total = mass.sum()
        if abs(total - 1.0) > 1e-12:
            raise PreconditionError(f"total mass must be 1, got {total!r}")
        for axis in range(mass.ndim):
            slabs = mass.sum(axis=tuple(a for a in range(mass.ndim) if a != axis))
            if np.abs(slabs - 1.0 / n).max() > _MARGIN_TOL:
                raise PreconditionError(
                    f"margins along axis {axis} deviate from 1/N by "
                    f"{np.abs(slabs - 1.0 / n).max():.3e}")
        mass = mass.copy()
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def dim(self) -> int:
        return self.mass.ndim

    @property
    def resolution(self) -> int:
        return self.mass.shape[0]


@dataclass(frozen=True)
class RankedSample:
    """Per-axis pseudo-ranks of a sample; each column is a permutation of 1..n."""

    ranks: np.ndarray  # shape (n, dim), values in 1..n

    def __post_init__(self) -> None:
        ranks = np.asarray(self.ranks, dtype=int)
        if ranks.ndim != 2 or ranks.shape[0] < 1:
            raise PreconditionError("ranks must be a non-empty (n, dim) array")
        n = ranks.shape[0]
        for axis in range(ranks.shape[1]):
            if not np.array_equal(np.sort(ranks[:, axis]), np.arange(1, n + 1)):
                raise PreconditionError(
                    f"axis {axis} ranks are not a permutation of 1..{n}")
        ranks = ranks.copy()
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def dim(self) -> int:
        return self.ranks.shape[1]


def pseudo_ranks(sample) -> RankedSample:
    """Rank each observation per axis, ties broken by original index order."""
    pts = np.asarray(sample, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise PreconditionError("sample must be a non-empty (n, dim) array")
    n = pts.shape[0]
    ranks = np.empty(pts.shape, dtype=int)
    for axis in range(pts.shape[1]):
        order = np.argsort(pts[:, axis], kind="stable")
        ranks[order, axis] = np.arange(1, n + 1)
    return RankedSample(ranks)


# ---------------------------------------------------------------------------
# Aggregation of analytic models
# ---------------------------------------------------------------------------

def aggregate(model: CopulaModel, resolution: int) -> CheckerboardGrid:
    """Checkerboard approximation of a model: cell mass = copula mass of the
    cell, exact for grid/step families and via inclusion-exclusion on the
    closed-form copula CDF otherwise."""
    if resolution < 1:
        raise PreconditionError(f"resolution must be >= 1, got {resolution}")
    masses = model.cell_masses(resolution)
    if masses is not None:
        return CheckerboardGrid(np.asarray(masses, dtype=float))
    if model.covariate_dim == 1:
        corners = np.arange(resolution + 1) / resolution
        cvals = model.cdf(corners[:, None], corners[None, :])
        if cvals is not None:
            cvals = np.asarray(cvals, dtype=float)
            if not np.isfinite(cvals).all():
                bad = np.argwhere(~np.isfinite(cvals))[0]
                raise EvaluationError(
                    f"non-finite CDF value at corner of cell {tuple(bad)}")
            mass = np.diff(np.diff(cvals, axis=0), axis=1)
            return CheckerboardGrid(mass)
    raise PreconditionError(
        f"model {model.describe()!r} has no exact aggregation path")


def aggregate_quadrature_masses(model: CopulaModel, resolution: int,
                                quad: QuadratureSpec = QuadratureSpec(4096)) -> np.ndarray:
    """Cell masses by integrating kernel-CDF differences over each covariate
    cell with sub-midpoint quadrature (bivariate only).

    Approximate: margins hold only up to quadrature error, so the result is
    returned as a raw array.  Serves as an independent cross-check of
    :func:`aggregate`.
    """
    if model.covariate_dim != 1:
        raise PreconditionError("quadrature aggregation is bivariate only")
    n = resolution
    sub = max(quad.cells // n, 8)
    corners = np.arange(n + 1) / n
    mass = np.empty((n, n))
    for i in range(n):
        xs = (i + (np.arange(sub) + 0.5) / sub) / n
        kv = model.kernel_cdf(xs[:, None], corners[None, :])
        if not np.isfinite(kv).all():
            raise EvaluationError(f"non-finite kernel value in covariate cell {i + 1}")
        mass[i] = np.diff(kv, axis=1).mean(axis=0) / n
    return mass


# ---------------------------------------------------------------------------
# Empirical checkerboard estimator
# ---------------------------------------------------------------------------

def _bilinear(cum: np.ndarray, n: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multilinear extension of the rank subcopula, evaluated at (u, v)."""
    tu, tv = u * n, v * n
    iu = np.clip(tu.astype(int), 0, n)
    jv = np.clip(tv.astype(int), 0, n)
    fu, fv = tu - iu, tv - jv
    iu1 = np.minimum(iu + 1, n)
    jv1 = np.minimum(jv + 1, n)
    return ((1 - fu) * (1 - fv) * cum[iu, jv] + fu * (1 - fv) * cum[iu1, jv]
            + (1 - fu) * fv * cum[iu, jv1] + fu * fv * cum[iu1, jv1])


def empirical_copula_corners(ranked: RankedSample, resolution: int) -> np.ndarray:
    """Values of the empirical copula E_n at the (N+1)^2 grid corners, by
    bilinear interpolation of the rank subcopula on the {0,1/n,..,1}^2
    lattice (the literal definition; O(n^2) memory, test-oracle route)."""
    n = ranked.n
    cum = np.zeros((n + 1, n + 1))
    cum[ranked.ranks[:, 0], ranked.ranks[:, 1]] += 1.0
    cum = cum.cumsum(axis=0).cumsum(axis=1) / n
    c = np.arange(resolution + 1) / resolution
    return _bilinear(cum, n, c[:, None], c[None, :])


def empirical_checkerboard(ranked: RankedSample, resolution: int) -> CheckerboardGrid:
    """Checkerboard aggregation of the empirical copula: cell masses are the
    E_n-volumes of the N x N cells.

    Equivalent to corner evaluation of the multilinear rank subcopula plus
    inclusion-exclusion, computed here by scattering each observation's rank
    square ((R-1)/n, R/n] x ((S-1)/n, S/n] onto the grid proportionally to
    overlap.  Overlaps are integer counts in units of 1/(nN), so cell masses
    are exact ratios and the uniform-margin invariant holds to rounding.
    """
    if ranked.dim != 2:
        raise PreconditionError("empirical checkerboard estimation is bivariate")
    if not 1 <= resolution <= ranked.n:
        raise PreconditionError(
            f"resolution must satisfy 1 <= N <= n, got N={resolution}, n={ranked.n}")
    n, nc = ranked.n, resolution
    mass = np.zeros((nc, nc))
    sides = []
    for axis in (0, 1):
        r = ranked.ranks[:, axis].astype(np.int64)
        first = (r - 1) * nc // n          # first grid cell touched
        last = (r * nc - 1) // n           # last grid cell touched (<= first+1)
        ov_first = np.where(last == first, nc, (first + 1) * n - (r - 1) * nc)
        ov_last = r * nc - last * n        # only meaningful when last > first
        sides.append((first, last, ov_first, ov_last))
    (xf, xl, oxf, oxl), (yf, yl, oyf, oyl) = sides
    scale = 1.0 / (n * nc * nc)
    np.add.at(mass, (xf, yf), oxf * oyf * scale)
    np.add.at(mass, (xf, yl), np.where(yl > yf, oxf * oyl, 0) * scale)
    np.add.at(mass, (xl, yf), np.where(xl > xf, oxl * oyf, 0) * scale)
    np.add.at(mass, (xl, yl), np.where((xl > xf) & (yl > yf), oxl * oyl, 0) * scale)
    return CheckerboardGrid(mass)


# ---------------------------------------------------------------------------
# Grid evaluation
# ---------------------------------------------------------------------------

def _conditional(grid: CheckerboardGrid):
    """Conditional cell probabilities given the covariate cell, plus the
    exclusive cumulative sums along the response axis."""
    mass = grid.mass
    weights = mass.sum(axis=-1, keepdims=True)
    n = grid.resolution
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(weights > 0.0, mass / weights, 1.0 / n)
    cum = np.zeros(mass.shape[:-1] + (n + 1,))
    np.cumsum(cond, axis=-1, out=cum[..., 1:])
    return cond, cum


def _cell_index(coord, n: int) -> np.ndarray:
    arr = np.asarray(coord, dtype=float)
    return np.minimum((arr * n).astype(int), n - 1)


def grid_kernel_cdf(grid: CheckerboardGrid, x, y):
    """Piecewise-linear conditional CDF of a checkerboard grid; constant in
    x within each covariate strip."""
    n = grid.resolution
    cond, cum = _conditional(grid)
    y = np.asarray(y, dtype=float)
    j = _cell_index(y, n)
    frac = y * n - j
    if grid.dim == 2:
        i = _cell_index(x, n)
        return cum[i, j] + cond[i, j] * frac
    if isinstance(x, (tuple, list)):
        x1, x2 = x
    else:
        arr = np.asarray(x, dtype=float)
        x1, x2 = arr[..., 0], arr[..., 1]
    i1, i2 = _cell_index(x1, n), _cell_index(x2, n)
    return cum[i1, i2, j] + cond[i1, i2, j] * frac


def grid_regression_values(grid: CheckerboardGrid) -> np.ndarray:
    """Per covariate cell, the conditional mean sum_j p_j (j - 1/2)/N."""
    n = grid.resolution
    cond, _ = _conditional(grid)
    centers = (np.arange(n) + 0.5) / n
    return cond @ centers


def grid_quantile_values(grid: CheckerboardGrid, tau: float) -> np.ndarray:
    """Per covariate cell, inf{y : F(y) >= tau} by exact inversion of the
    piecewise-linear conditional CDF (no bisection)."""
    if not 0.0 < tau <= 1.0:
        raise PreconditionError(f"tau must lie in (0,1], got {tau}")
    n = grid.resolution
    cond, cum = _conditional(grid)
    flat_cond = cond.reshape(-1, n)
    flat_cum = cum.reshape(-1, n + 1)
    j0 = np.minimum((flat_cum[:, 1:] < tau).sum(axis=1), n - 1)
    rows = np.arange(flat_cond.shape[0])
    p = flat_cond[rows, j0]
    base = flat_cum[rows, j0]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(p > 0.0, np.clip((tau - base) / p, 0.0, 1.0), 0.0)
    vals = (j0 + frac) / n
    return vals.reshape(cond.shape[:-1])


def marginalize_3d(grid: CheckerboardGrid, drop_axis: int = 2) -> CheckerboardGrid:
    """Sum out the second covariate of a 3-d grid, yielding the grid of the
    (x1, y)-marginal copula."""
    if grid.dim != 3:
        raise PreconditionError(f"marginalize_3d needs a 3-d grid, got dim {grid.dim}")
    if drop_axis != 2:
        raise PreconditionError("only the second covariate (drop_axis=2) can be dropped")
    return CheckerboardGrid(grid.mass.sum(axis=1))


# ---------------------------------------------------------------------------
# Grid-backed copula model
# ---------------------------------------------------------------------------

class GridCopula(CopulaModel):
    """Copula model backed by a checkerboard grid."""

    def __init__(self, grid: CheckerboardGrid):
        self.grid = grid
        self.covariate_dim = grid.dim - 1

    def describe(self) -> str:
        return f"grid N={self.grid.resolution} dim={self.grid.dim}"

    def kernel_cdf(self, x, y):
        return grid_kernel_cdf(self.grid, x, y)

    def flip(self) -> "GridCopula":
        return GridCopula(CheckerboardGrid(self.grid.mass[..., ::-1]))

    def regression_closed(self, x):
        vals = grid_regression_values(self.grid)
        n = self.grid.resolution
        if self.grid.dim == 2:
            return vals[_cell_index(x, n)]
        x1, x2 = x if isinstance(x, (tuple, list)) else (
            np.asarray(x, float)[..., 0], np.asarray(x, float)[..., 1])
        return vals[_cell_index(x1, n), _cell_index(x2, n)]

    def regression_step_values(self) -> Optional[np.ndarray]:
        if self.grid.dim != 2:
            return None
        return grid_regression_values(self.grid)

    def quantile_closed(self, x, tau):
        n = self.grid.resolution
        tau = np.asarray(tau, dtype=float)
        if self.grid.dim != 2:
            vals_scalar = tau.ndim == 0
            if vals_scalar:
                vals = grid_quantile_values(self.grid, float(tau))
                x1, x2 = x if isinstance(x, (tuple, list)) else (
                    np.asarray(x, float)[..., 0], np.asarray(x, float)[..., 1])
                return vals[_cell_index(x1, n), _cell_index(x2, n)]
            return None
        x = np.asarray(x, dtype=float)
        if tau.ndim == 0:
            return grid_quantile_values(self.grid, float(tau))[_cell_index(x, n)]
        # per-point levels (sampling): invert each row's piecewise-linear CDF
        cond, cum = _conditional(self.grid)
        i = _cell_index(x, n)
        xt, tt = np.broadcast_arrays(i, tau)
        row_cum = cum[xt.ravel()]
        t = tt.ravel()[:, None]
        j0 = np.minimum((row_cum[:, 1:] < t).sum(axis=1), n - 1)
        rows = np.arange(row_cum.shape[0])
        p = cond[xt.ravel(), j0]
        base = row_cum[rows, j0]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(p > 0.0, np.clip((t[:, 0] - base) / p, 0.0, 1.0), 0.0)
        return ((j0 + frac) / n).reshape(xt.shape)

    def cell_masses(self, n_cells: int) -> np.ndarray:
        src = self.grid.mass
        n = self.grid.resolution
        if n_cells == n:
            return src.copy()
        m = n_cells
        w = np.zeros((m, n))
        for a in range(m):
            for i in range(n):
                ov = max(0.0, min((a + 1) / m, (i + 1) / n) - max(a / m, i / n))
                w[a, i] = ov * n  # fraction of source cell i covered
        if self.grid.dim == 2:
            return np.einsum("ai,bj,ij->ab", w, w, src)
        return np.einsum("ai,bj,ck,ijk->abc", w, w, w, src)


# ---------------------------------------------------------------------------
# Grid file format: CSV (i,j[,k],mass) + JSON sidecar {dim, N}
# ---------------------------------------------------------------------------

def _sidecar_path(path) -> str:
    return str(path) + ".json"


def write_grid(grid: CheckerboardGrid, path, values: Optional[np.ndarray] = None) -> None:
    """Write a grid as CSV with 1-based lexicographic cell indices and a JSON
    sidecar; 17-significant-digit decimals make the round trip bit exact.

    ``values`` overrides the stored column (used for density output N^d *
    mass); the column name stays ``mass`` per the file format.
    """
    data = grid.mass if values is None else np.asarray(values, dtype=float)
    header = ["i", "j", "k"][: grid.dim] + ["mass"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for idx in np.ndindex(data.shape):
            writer.writerow([*(i + 1 for i in idx), format(data[idx], ".17g")])
    with open(_sidecar_path(path), "w") as fh:
        json.dump({"dim": grid.dim, "N": grid.resolution}, fh)
        fh.write("\n")


def read_grid(path) -> CheckerboardGrid:
    """Read a grid written by :func:`write_grid` (validates the invariants)."""
    with open(_sidecar_path(path)) as fh:
        meta = json.load(fh)
    dim, n = int(meta["dim"]), int(meta["N"])
    mass = np.zeros((n,) * dim)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["i", "j", "k"][:dim] + ["mass"]:
            raise PreconditionError(f"unexpected grid CSV header {header!r}")
        for row in reader:
            idx = tuple(int(v) - 1 for v in row[:dim])
            mass[idx] = float(row[dim])
    return CheckerboardGrid(mass)
