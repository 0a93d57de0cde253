"""Parametric copula families represented by their conditional Markov kernels.

Each model exposes the right-continuous conditional CDF  K(x, [0, y])  of the
response given the covariates, plus closed forms (regression, quantile,
copula CDF, exact checkerboard cell masses) where the family admits them.
Atoms are carried implicitly by the CDF; the left-continuous version
``kernel_cdf_left`` is what flipping needs.

Covariate conventions: ``x`` is an array (broadcastable with ``y``) for
one-dimensional covariates, and a pair ``(x1, x2)`` (or an array with last
axis of length 2) for the three-dimensional cube family.  Parameters on a
lambda-null set (x in {0,1} for Marshall-Olkin / Clayton) are evaluated at
the limit from inside via clamping to [1e-12, 1 - 1e-12].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import FamilyParseError, PreconditionError
from .numerics import RngStream, invert_monotone_array

__all__ = [
    "CopulaModel",
    "PiecewiseMap",
    "Product",
    "CompletelyDependent",
    "CheckerboardPermutation",
    "OrdinalSumPi",
    "Cube3D",
    "MarshallOlkin",
    "Clayton",
    "QuantileBoundKernel",
    "FlippedModel",
    "comonotone",
    "sample",
    "parse_family",
]

_CLAMP = 1e-12
# Guards >= comparisons sitting exactly on attainment boundaries against
# 1-ulp rounding of the threshold; acts only on a measure-zero set.
_BOUNDARY_EPS = 1e-12


class CopulaModel:
    """Base class: a copula given through its conditional Markov kernel."""

    covariate_dim: int = 1
    # True when the kernel has no flat stretch at an interior level, so
    # inf{y : K(x,[0,y]) > s} = Q^s(x) for s in (0,1) and the flipped model
    # inherits a closed-form quantile (atoms are fine; flats are not)
    _flip_quantile_safe: bool = False

    # --- required -----------------------------------------------------
    def kernel_cdf(self, x, y):
        """Right-continuous conditional CDF K(x, [0, y]); broadcasts."""
        raise NotImplementedError

    def describe(self) -> str:
        """Canonical family-grammar string, e.g. ``mo alpha=0.35 beta=0.65``."""
        raise NotImplementedError

    # --- defaults, overridden where a closed form exists ---------------
    def kernel_cdf_left(self, x, y):
        """Left-continuous version K(x, [0, y)); equals kernel_cdf when atomless."""
        return self.kernel_cdf(x, y)

    def flip(self) -> "CopulaModel":
        """Model of the copula reflected in the response coordinate."""
        return FlippedModel(self)

    def regression_closed(self, x):
        """Closed-form conditional mean, or None."""
        return None

    def quantile_closed(self, x, tau):
        """Closed-form conditional tau-quantile, or None."""
        return None

    def regression_step_values(self) -> Optional[np.ndarray]:
        """Regression as values of a uniform step function, when exact."""
        return None

    def regression_cell_means(self, pieces: int) -> Optional[np.ndarray]:
        """Exact per-cell averages of the regression function, or None."""
        return None

    def abs_deviation_survival(self, a: float) -> Optional[float]:
        """Exact mass of {x : |r(x) - 1/2| >= a}, or None."""
        return None

    def cdf(self, x, y):
        """Closed-form copula CDF C(x, y) (bivariate families), or None."""
        return None

    def cell_masses(self, n_cells: int) -> Optional[np.ndarray]:
        """Exact checkerboard cell masses at resolution n_cells, or None."""
        return None

    # --- shared helpers -------------------------------------------------
    def _cov(self, x):
        d = self.covariate_dim
        if d == 1:
            return (np.asarray(x, dtype=float),)
        if isinstance(x, (tuple, list)) and len(x) == d:
            return tuple(np.asarray(c, dtype=float) for c in x)
        arr = np.asarray(x, dtype=float)
        if arr.ndim >= 1 and arr.shape[-1] == d:
            return tuple(arr[..., k] for k in range(d))
        raise PreconditionError(
            f"covariate point must have {d} coordinates for {self.describe()!r}")

    def __repr__(self) -> str:  # pragma: no cover
        return f"<{type(self).__name__} {self.describe()!r}>"


# ---------------------------------------------------------------------------
# Measure-preserving piecewise maps and completely dependent copulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Piece:
    lo: float
    hi: float
    slope: float      # +1 or -1
    intercept: float  # h(x) = intercept + slope * x

    def image(self) -> tuple:
        a = self.intercept + self.slope * self.lo
        b = self.intercept + self.slope * self.hi
        return (min(a, b), max(a, b))


class PiecewiseMap:
    """Lebesgue-measure-preserving map [0,1] -> [0,1], affine with slope +-1
    on each of finitely many contiguous source intervals whose images
    partition [0,1] up to null sets."""

    def __init__(self, pieces: Sequence[_Piece], label: str):
        pieces = sorted(pieces, key=lambda p: p.lo)
        if not pieces:
            raise ValueError("piecewise map needs at least one piece")
        tol = 1e-12
        if abs(pieces[0].lo) > tol or abs(pieces[-1].hi - 1.0) > tol:
            raise ValueError("source intervals must cover [0,1]")
        for a, b in zip(pieces, pieces[1:]):
            if abs(a.hi - b.lo) > tol:
                raise ValueError("source intervals must be contiguous")
        images = sorted(p.image() for p in pieces)
        if abs(images[0][0]) > tol or abs(images[-1][1] - 1.0) > tol:
            raise ValueError("images must partition [0,1]")
        for (_, b), (c, _) in zip(images, images[1:]):
            if c < b - tol:
                raise ValueError("images overlap; map is not measure preserving")
        if abs(sum(b - a for a, b in images) - 1.0) > 1e-9:
            raise ValueError("image lengths must sum to 1")
        self.pieces = tuple(pieces)
        self.label = label
        self._uppers = np.array([p.hi for p in pieces])
        self._slopes = np.array([p.slope for p in pieces])
        self._intercepts = np.array([p.intercept for p in pieces])

    @classmethod
    def identity(cls) -> "PiecewiseMap":
        return cls([_Piece(0.0, 1.0, 1.0, 0.0)], "id")

    @classmethod
    def reflection(cls) -> "PiecewiseMap":
        return cls([_Piece(0.0, 1.0, -1.0, 1.0)], "flip")

    @classmethod
    def shift(cls, c: float) -> "PiecewiseMap":
        c = float(c)
        if not 0.0 < c < 1.0:
            raise ValueError(f"shift offset must be in (0,1), got {c}")
        return cls([_Piece(0.0, 1.0 - c, 1.0, c),
                    _Piece(1.0 - c, 1.0, 1.0, c - 1.0)], f"shift:{c:g}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.minimum(np.searchsorted(self._uppers, x, side="right"),
                         len(self.pieces) - 1)
        return self._intercepts[idx] + self._slopes[idx] * x

    def complement(self) -> "PiecewiseMap":
        """The map 1 - h (also measure preserving)."""
        pieces = [_Piece(p.lo, p.hi, -p.slope, 1.0 - p.intercept)
                  for p in self.pieces]
        label = {"id": "flip", "flip": "id"}.get(self.label, f"1-({self.label})")
        return PiecewiseMap(pieces, label)

    def lower_set_intervals(self, y: float) -> list:
        """Disjoint x-intervals making up {x : h(x) <= y} (up to endpoints)."""
        out = []
        for p in self.pieces:
            if p.slope > 0:       # h <= y on [lo, y - intercept]
                hi = min(p.hi, y - p.intercept)
                if hi > p.lo:
                    out.append((p.lo, hi))
            else:                 # h <= y on [intercept - y, hi]
                lo = max(p.lo, p.intercept - y)
                if p.hi > lo:
                    out.append((lo, p.hi))
        return sorted(out)


def _overlap(a_lo, a_hi, b_lo, b_hi) -> float:
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


class CompletelyDependent(CopulaModel):
    """Copula whose kernel is the point mass at h(x); extremal for the
    L^p deviation bounds."""

    _flip_quantile_safe = True

    def __init__(self, h: PiecewiseMap):
        self.h = h

    def describe(self) -> str:
        return f"cd h={self.h.label}"

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        return (self.h(x) <= y).astype(float)

    def kernel_cdf_left(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        return (self.h(x) < y).astype(float)

    def flip(self) -> "CompletelyDependent":
        return CompletelyDependent(self.h.complement())

    def regression_closed(self, x):
        (x,) = self._cov(x)
        return self.h(x)

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        return np.broadcast_to(self.h(x), np.broadcast_shapes(x.shape, tau.shape)).copy()

    def abs_deviation_survival(self, a: float) -> float:
        # push-forward of lambda under h is lambda, so the mass is 1 - 2a
        if a <= _BOUNDARY_EPS:
            return 1.0
        return max(0.0, 1.0 - 2.0 * a) if a <= 0.5 + _BOUNDARY_EPS else 0.0

    def regression_cell_means(self, pieces: int) -> np.ndarray:
        # exact averages of the piecewise-affine h; r = h attains the
        # Hardy-Littlewood bound with zero slack, so no sampling error is
        # tolerable here
        sums = np.zeros(pieces)
        for p in self.h.pieces:
            first = int(p.lo * pieces)
            last = min(int(math.ceil(p.hi * pieces)), pieces)
            for i in range(first, last):
                lo, hi = max(p.lo, i / pieces), min(p.hi, (i + 1) / pieces)
                if hi > lo:
                    sums[i] += (p.intercept * (hi - lo)
                                + p.slope * 0.5 * (hi * hi - lo * lo))
        return sums * pieces

    def cdf(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)

        def one(xv, yv):
            total = 0.0
            for lo, hi in self.h.lower_set_intervals(float(yv)):
                total += _overlap(lo, hi, 0.0, float(xv))
            return total

        return np.vectorize(one, otypes=[float])(x, y)

    def cell_masses(self, n_cells: int) -> np.ndarray:
        n = n_cells
        mass = np.zeros((n, n))
        for p in self.h.pieces:
            for i in range(n):
                xlo, xhi = max(p.lo, i / n), min(p.hi, (i + 1) / n)
                if xhi <= xlo:
                    continue
                ia = p.intercept + p.slope * xlo
                ib = p.intercept + p.slope * xhi
                ylo, yhi = min(ia, ib), max(ia, ib)
                j_first = max(int(ylo * n), 0)
                j_last = min(int(math.ceil(yhi * n)), n)
                for j in range(j_first, j_last):
                    mass[i, j] += _overlap(ylo, yhi, j / n, (j + 1) / n)
        return mass


def comonotone() -> CompletelyDependent:
    """The comonotone copula M: completely dependent with h = id."""
    return CompletelyDependent(PiecewiseMap.identity())


# ---------------------------------------------------------------------------
# Product copula
# ---------------------------------------------------------------------------

class Product(CopulaModel):
    """Independence copula; kernel K(x, [0,y]) = y for every x."""

    _flip_quantile_safe = True

    def __init__(self, covariate_dim: int = 1):
        if covariate_dim not in (1, 2):
            raise ValueError("covariate_dim must be 1 or 2")
        self.covariate_dim = covariate_dim

    def describe(self) -> str:
        return "pi" if self.covariate_dim == 1 else f"pi dim={self.covariate_dim + 1}"

    def kernel_cdf(self, x, y):
        cov = self._cov(x)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(*(c.shape for c in cov), y.shape)
        return np.broadcast_to(y, shape).copy()

    def flip(self) -> "Product":
        return self

    def regression_closed(self, x):
        cov = self._cov(x)
        return np.broadcast_to(0.5, np.broadcast_shapes(*(c.shape for c in cov))).copy()

    def quantile_closed(self, x, tau):
        cov = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        shape = np.broadcast_shapes(*(c.shape for c in cov), tau.shape)
        return np.broadcast_to(tau, shape).copy()

    def abs_deviation_survival(self, a: float) -> float:
        return 1.0 if a <= _BOUNDARY_EPS else 0.0

    def cdf(self, x, y):
        if self.covariate_dim != 1:
            return None
        (x,) = self._cov(x)
        return x * np.asarray(y, dtype=float)

    def cell_masses(self, n_cells: int) -> np.ndarray:
        d = self.covariate_dim + 1
        return np.full((n_cells,) * d, 1.0 / n_cells ** d)


# ---------------------------------------------------------------------------
# Checkerboard permutation copulas (Example with density N * 1_{I_i x I_sigma(i)})
# ---------------------------------------------------------------------------

class CheckerboardPermutation(CopulaModel):
    """Checkerboard copula spreading mass 1/N uniformly over each square
    I_{N,i} x I_{N,sigma(i)}; attains the L^1 deviation bound for even N."""

    def __init__(self, n: int, sigma: Sequence[int]):
        if n < 2:
            raise ValueError(f"resolution must be >= 2, got {n}")
        sigma = tuple(int(s) for s in sigma)
        if sorted(sigma) != list(range(1, n + 1)):
            raise ValueError(f"sigma must be a permutation of 1..{n}, got {sigma}")
        self.n = n
        self.sigma = sigma
        self._sigma_arr = np.asarray(sigma, dtype=float)

    def describe(self) -> str:
        return f"cbperm N={self.n} sigma={','.join(str(s) for s in self.sigma)}"

    def _target(self, x: np.ndarray) -> np.ndarray:
        idx = np.minimum((x * self.n).astype(int), self.n - 1)
        return self._sigma_arr[idx]

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        tgt = self._target(x)
        return np.clip(self.n * y - (tgt - 1.0), 0.0, 1.0)

    def flip(self) -> "CheckerboardPermutation":
        return CheckerboardPermutation(
            self.n, [self.n + 1 - s for s in self.sigma])

    def regression_closed(self, x):
        (x,) = self._cov(x)
        return (self._target(x) - 0.5) / self.n

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        return (self._target(x) - 1.0 + tau) / self.n

    def regression_step_values(self) -> np.ndarray:
        return (self._sigma_arr - 0.5) / self.n

    def cell_masses(self, n_cells: int) -> np.ndarray:
        m, n = n_cells, self.n
        mass = np.zeros((m, m))
        for k in range(n):
            tk = self.sigma[k] - 1
            for i in range(m):
                ox = _overlap(i / m, (i + 1) / m, k / n, (k + 1) / n)
                if ox <= 0.0:
                    continue
                for j in range(m):
                    oy = _overlap(j / m, (j + 1) / m, tk / n, (tk + 1) / n)
                    if oy > 0.0:
                        mass[i, j] += n * ox * oy
        return mass


# ---------------------------------------------------------------------------
# Ordinal sum of Pi on (0,b), (b,1-b), (1-b,1): attains the survival bound
# ---------------------------------------------------------------------------

class OrdinalSumPi(CopulaModel):
    """Ordinal sum pasting shrunk copies of the independence copula along
    the diagonal segments (0,b), (b,1-b), (1-b,1)."""

    def __init__(self, b: float):
        b = float(b)
        if not 0.0 < b < 0.5:
            raise ValueError(f"b must lie in (0, 1/2), got {b}")
        self.b = b
        self._bounds = np.array([b, 1.0 - b])
        self._lo = np.array([0.0, b, 1.0 - b])
        self._hi = np.array([b, 1.0 - b, 1.0])

    def describe(self) -> str:
        return f"ordsum b={self.b:g}"

    def _segment(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._bounds, x, side="right")

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        seg = self._segment(x)
        lo, hi = self._lo[seg], self._hi[seg]
        return np.clip((y - lo) / (hi - lo), 0.0, 1.0)

    def regression_closed(self, x):
        (x,) = self._cov(x)
        seg = self._segment(x)
        return 0.5 * (self._lo[seg] + self._hi[seg])

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        seg = self._segment(x)
        return self._lo[seg] + tau * (self._hi[seg] - self._lo[seg])

    def abs_deviation_survival(self, a: float) -> float:
        # |r - 1/2| equals (1-b)/2 on mass 2b and 0 on the middle segment
        if a <= _BOUNDARY_EPS:
            return 1.0
        return 2.0 * self.b if a <= (1.0 - self.b) / 2.0 + _BOUNDARY_EPS else 0.0

    def cell_masses(self, n_cells: int) -> np.ndarray:
        m = n_cells
        mass = np.zeros((m, m))
        for lo, hi in zip(self._lo, self._hi):
            dens = 1.0 / (hi - lo)
            for i in range(m):
                ox = _overlap(i / m, (i + 1) / m, lo, hi)
                if ox <= 0.0:
                    continue
                for j in range(m):
                    oy = _overlap(j / m, (j + 1) / m, lo, hi)
                    if oy > 0.0:
                        mass[i, j] += dens * ox * oy
        return mass


# ---------------------------------------------------------------------------
# Cube copula: 3-d, mass 1/4 on each of four half-resolution sub-cubes
# ---------------------------------------------------------------------------

class Cube3D(CopulaModel):
    """Three-dimensional copula spreading mass uniformly on the cubes
    I1^3, I2^2 x I1, I2 x I1 x I2 and I1 x I2^2 (I1 = (0,1/2), I2 = (1/2,1)).

    Conditionals are uniform on I1 over the diagonal covariate quadrants and
    uniform on I2 over the mixed ones; the canonical example where the
    partial-vine approximation (= the product copula) errs by half the
    maximal regression distance.
    """

    covariate_dim = 2

    def __init__(self, swapped: bool = False):
        self.swapped = bool(swapped)

    def describe(self) -> str:
        return "cube swapped=1" if self.swapped else "cube"

    def _low_half(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        q1 = np.minimum((x1 * 2).astype(int), 1)
        q2 = np.minimum((x2 * 2).astype(int), 1)
        diag = q1 == q2
        return diag ^ self.swapped

    def kernel_cdf(self, x, y):
        x1, x2 = self._cov(x)
        y = np.asarray(y, dtype=float)
        low = self._low_half(x1, x2)
        return np.where(low, np.clip(2.0 * y, 0.0, 1.0),
                        np.clip(2.0 * y - 1.0, 0.0, 1.0))

    def flip(self) -> "Cube3D":
        return Cube3D(not self.swapped)

    def regression_closed(self, x):
        x1, x2 = self._cov(x)
        return np.where(self._low_half(x1, x2), 0.25, 0.75)

    def quantile_closed(self, x, tau):
        x1, x2 = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        return np.where(self._low_half(x1, x2), 0.5 * tau, 0.5 * (tau + 1.0))

    def abs_deviation_survival(self, a: float) -> float:
        return 1.0 if a <= 0.25 + _BOUNDARY_EPS else 0.0

    def cell_masses(self, n_cells: int) -> np.ndarray:
        m = n_cells
        lowcube, highcube = (0.0, 0.5), (0.5, 1.0)
        cubes = [(lowcube, lowcube, lowcube), (highcube, highcube, lowcube),
                 (highcube, lowcube, highcube), (lowcube, highcube, highcube)]
        if self.swapped:
            cubes = [(a, b, (0.5 - c[0], 1.0 - c[0])) for a, b, c in cubes]
        mass = np.zeros((m, m, m))
        edges = [(i / m, (i + 1) / m) for i in range(m)]
        for cx1, cx2, cy in cubes:
            o1 = np.array([_overlap(lo, hi, *cx1) for lo, hi in edges])
            o2 = np.array([_overlap(lo, hi, *cx2) for lo, hi in edges])
            o3 = np.array([_overlap(lo, hi, *cy) for lo, hi in edges])
            mass += 2.0 * o1[:, None, None] * o2[None, :, None] * o3[None, None, :]
        return mass


# ---------------------------------------------------------------------------
# Marshall-Olkin
# ---------------------------------------------------------------------------

class MarshallOlkin(CopulaModel):
    """Marshall-Olkin copula M_{a,b}(x,y) = x^{1-a} y for y <= x^{a/b},
    x y^{1-b} above; the kernel carries a point mass at y = x^{a/b}.

    Parameters are restricted to (0,1): outside that range the closed-form
    kernel is not a nondecreasing CDF.
    """

    _flip_quantile_safe = True

    def __init__(self, alpha: float, beta: float):
        alpha, beta = float(alpha), float(beta)
        if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
            raise ValueError(
                f"alpha and beta must lie in (0,1), got ({alpha}, {beta})")
        self.alpha = alpha
        self.beta = beta

    def describe(self) -> str:
        return f"mo alpha={self.alpha:g} beta={self.beta:g}"

    def _a(self, x: np.ndarray) -> np.ndarray:
        return x ** (self.alpha / self.beta)

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        y = np.asarray(y, dtype=float)
        below = (1.0 - self.alpha) * x ** (-self.alpha) * y
        above = y ** (1.0 - self.beta)
        return np.where(y < self._a(x), below, above)

    def kernel_cdf_left(self, x, y):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        y = np.asarray(y, dtype=float)
        below = (1.0 - self.alpha) * x ** (-self.alpha) * y
        above = y ** (1.0 - self.beta)
        return np.where(y <= self._a(x), below, above)

    def regression_closed(self, x):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        c = self.alpha * (2.0 / self.beta - 1.0)
        xc = x ** c
        return 1.0 - 0.5 * (1.0 - self.alpha) * xc - (1.0 - xc) / (2.0 - self.beta)

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        tau = np.asarray(tau, dtype=float)
        y_hi = x ** (self.alpha * (1.0 / self.beta - 1.0))
        y_lo = (1.0 - self.alpha) * y_hi
        lower = tau * x ** self.alpha / (1.0 - self.alpha)
        upper = tau ** (1.0 / (1.0 - self.beta))
        return np.select([tau < y_lo, tau <= y_hi], [lower, self._a(x)], upper)

    def cdf(self, x, y):
        # no clamp: the CDF itself is regular on all of [0,1]^2, and exact
        # corner values keep aggregated grid margins exact
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        return np.where(y <= self._a(np.maximum(x, _CLAMP)),
                        x ** (1.0 - self.alpha) * y,
                        x * y ** (1.0 - self.beta))


# ---------------------------------------------------------------------------
# Clayton
# ---------------------------------------------------------------------------

class Clayton(CopulaModel):
    """Clayton copula C_t(x,y) = (x^{-t} + y^{-t} - 1)^{-1/t}, t > 0.

    The kernel is strictly increasing and continuous in y; the regression
    function has no elementary closed form (quadrature is used downstream),
    but the quantile does.
    """

    _flip_quantile_safe = True

    def __init__(self, theta: float):
        theta = float(theta)
        if theta <= 0.0:
            raise ValueError(f"theta must be positive, got {theta}")
        self.theta = theta

    def describe(self) -> str:
        return f"clayton theta={self.theta:g}"

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        y = np.asarray(y, dtype=float)
        t = self.theta
        with np.errstate(divide="ignore", over="ignore"):
            s = x ** (-t) + np.where(y > 0.0, y, 1.0) ** (-t) - 1.0
            val = x ** (-t - 1.0) * s ** (-(1.0 + t) / t)
        return np.where(y > 0.0, val, 0.0)

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        x = np.clip(x, _CLAMP, 1.0 - _CLAMP)
        tau = np.asarray(tau, dtype=float)
        t = self.theta
        return (1.0 + x ** (-t) * (tau ** (-t / (t + 1.0)) - 1.0)) ** (-1.0 / t)

    def cdf(self, x, y):
        (x,) = self._cov(x)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = self.theta
        with np.errstate(divide="ignore", over="ignore"):
            val = (np.where(x > 0.0, x, 1.0) ** (-t)
                   + np.where(y > 0.0, y, 1.0) ** (-t) - 1.0) ** (-1.0 / t)
        return np.where((x > 0.0) & (y > 0.0), val, 0.0)


# ---------------------------------------------------------------------------
# Two-atom kernels attaining the quantile-average bounds
# ---------------------------------------------------------------------------

class QuantileBoundKernel(CopulaModel):
    """Kernel K(x,E) = t 1_E(t x) + (1-t) 1_E(t + (1-t) x) with t = tau in
    lower mode and t = tau - 1/n in upper mode; realizes the extremes of the
    average tau-quantile (tau/2 resp. 1/2 + (tau - 1/n)/2)."""

    def __init__(self, tau: float, mode: str = "lower", n: int = 100):
        tau = float(tau)
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0,1), got {tau}")
        if mode not in ("lower", "upper"):
            raise ValueError(f"mode must be 'lower' or 'upper', got {mode!r}")
        if int(n) < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.tau = tau
        self.mode = mode
        self.n = int(n)
        self.t = tau if mode == "lower" else tau - 1.0 / self.n
        if not 0.0 < self.t < 1.0:
            raise ValueError(
                f"tau - 1/n = {self.t} must lie in (0,1); increase n")

    def describe(self) -> str:
        return f"qbk tau={self.tau:g} mode={self.mode} n={self.n}"

    def _atoms(self, x: np.ndarray):
        return self.t * x, self.t + (1.0 - self.t) * x

    def kernel_cdf(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        l1, l2 = self._atoms(x)
        return self.t * (y >= l1) + (1.0 - self.t) * (y >= l2)

    def kernel_cdf_left(self, x, y):
        (x,) = self._cov(x)
        y = np.asarray(y, dtype=float)
        l1, l2 = self._atoms(x)
        return self.t * (y > l1) + (1.0 - self.t) * (y > l2)

    def regression_closed(self, x):
        (x,) = self._cov(x)
        l1, l2 = self._atoms(x)
        return self.t * l1 + (1.0 - self.t) * l2

    def quantile_closed(self, x, tau):
        (x,) = self._cov(x)
        tau = np.asarray(tau, dtype=float)
        l1, l2 = self._atoms(x)
        return np.where(tau <= self.t, l1, l2)

    def cell_masses(self, n_cells: int) -> np.ndarray:
        m = n_cells
        mass = np.zeros((m, m))
        branches = [(self.t, self.t, 0.0), (1.0 - self.t, 1.0 - self.t, self.t)]
        for weight, slope, icept in branches:
            for i in range(m):
                ylo = icept + slope * (i / m)
                yhi = icept + slope * ((i + 1) / m)
                j_first = max(int(ylo * m), 0)
                j_last = min(int(math.ceil(yhi * m)), m)
                for j in range(j_first, j_last):
                    oy = _overlap(ylo, yhi, j / m, (j + 1) / m)
                    if oy > 0.0:
                        mass[i, j] += weight * oy / slope
        return mass


# ---------------------------------------------------------------------------
# Flipping
# ---------------------------------------------------------------------------

class FlippedModel(CopulaModel):
    """Reflection of a model in the response coordinate.

    Kernel duality: flip.cdf(y) = 1 - base.cdf_left(1-y) and
    flip.cdf_left(y) = 1 - base.cdf(1-y), so flipping twice is the identity.
    """

    def __init__(self, base: CopulaModel):
        self.base = base
        self.covariate_dim = base.covariate_dim

    def describe(self) -> str:
        return f"flip({self.base.describe()})"

    def kernel_cdf(self, x, y):
        y = np.asarray(y, dtype=float)
        return 1.0 - self.base.kernel_cdf_left(x, 1.0 - y)

    def kernel_cdf_left(self, x, y):
        y = np.asarray(y, dtype=float)
        return 1.0 - self.base.kernel_cdf(x, 1.0 - y)

    def flip(self) -> CopulaModel:
        return self.base

    def regression_closed(self, x):
        r = self.base.regression_closed(x)
        return None if r is None else 1.0 - r

    def quantile_closed(self, x, tau):
        # Q_flip^tau = 1 - inf{y : K(x,[0,y]) > 1-tau}, which equals
        # 1 - Q^{1-tau} whenever the base kernel has no interior flats
        if not self.base._flip_quantile_safe:
            return None
        tau = np.asarray(tau, dtype=float)
        q = self.base.quantile_closed(x, np.maximum(1.0 - tau, 1e-15))
        return None if q is None else 1.0 - np.asarray(q)

    def regression_step_values(self) -> Optional[np.ndarray]:
        vals = self.base.regression_step_values()
        return None if vals is None else 1.0 - vals

    def regression_cell_means(self, pieces: int) -> Optional[np.ndarray]:
        vals = self.base.regression_cell_means(pieces)
        return None if vals is None else 1.0 - vals

    def abs_deviation_survival(self, a: float) -> Optional[float]:
        # |(1 - r) - 1/2| = |r - 1/2|
        return self.base.abs_deviation_survival(a)

    def cdf(self, x, y):
        base = self.base.cdf(x, 1.0 - np.asarray(y, dtype=float))
        if base is None:
            return None
        (x1,) = self._cov(x) if self.covariate_dim == 1 else (None,)
        if x1 is None:
            return None
        return x1 - base

    def cell_masses(self, n_cells: int) -> Optional[np.ndarray]:
        mass = self.base.cell_masses(n_cells)
        return None if mass is None else mass[..., ::-1].copy()


# ---------------------------------------------------------------------------
# Sampling by conditional inversion
# ---------------------------------------------------------------------------

def sample(model: CopulaModel, n: int, rng: RngStream) -> np.ndarray:
    """Draw n points from the copula: covariates uniform, response by
    conditional inversion Y = inf{y : K(X, [0,y]) >= T} with T uniform.

    Returns an array of shape (n, covariate_dim + 1); pure in (model, n, rng).
    """
    if n < 0:
        raise PreconditionError(f"sample size must be >= 0, got {n}")
    gen = rng.generator()
    d = model.covariate_dim
    x = gen.random((n, d))
    t = 1.0 - gen.random(n)  # uniform on (0, 1]
    if n == 0:
        return np.empty((0, d + 1))
    xc = x[:, 0] if d == 1 else (x[:, 0], x[:, 1])
    y = model.quantile_closed(xc, t)
    if y is None:
        y = invert_monotone_array(lambda ys: model.kernel_cdf(xc, ys), t,
                                  tol=1e-12)
    return np.column_stack([x, np.asarray(y, dtype=float)])


# ---------------------------------------------------------------------------
# Family specification grammar (shared with the CLI)
# ---------------------------------------------------------------------------

def _parse_params(tokens) -> dict:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise FamilyParseError(f"expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        params[key.strip().lower()] = val.strip()
    return params


def _need(params: dict, key: str, spec: str) -> str:
    if key not in params:
        raise FamilyParseError(f"family {spec!r} requires parameter {key}=")
    return params.pop(key)


def parse_family(spec: str) -> CopulaModel:
    """Parse a family spec like ``mo alpha=0.35 beta=0.65`` into a model.

    Grammar: pi [dim=2|3] | cd h=id|flip|shift:c | cbperm N=.. sigma=i,j,..
    | ordsum b=.. | cube | mo alpha=.. beta=.. | clayton theta=..
    | qbk tau=.. mode=lower|upper [n=..].  ``m``/``comonotone`` abbreviate
    ``cd h=id``.
    """
    tokens = spec.strip().split()
    if not tokens:
        raise FamilyParseError("empty family specification")
    name = tokens[0].lower()
    params = _parse_params(tokens[1:])
    try:
        if name in ("pi", "product", "indep"):
            dim = int(params.pop("dim", "2"))
            if dim not in (2, 3):
                raise FamilyParseError(f"pi supports dim=2 or dim=3, got {dim}")
            model = Product(covariate_dim=dim - 1)
        elif name in ("m", "comonotone"):
            model = comonotone()
        elif name == "cd":
            h = _need(params, "h", name)
            if h == "id":
                pm = PiecewiseMap.identity()
            elif h == "flip":
                pm = PiecewiseMap.reflection()
            elif h.startswith("shift:"):
                pm = PiecewiseMap.shift(float(h[len("shift:"):]))
            else:
                raise FamilyParseError(f"unknown map {h!r}; use id|flip|shift:c")
            model = CompletelyDependent(pm)
        elif name == "cbperm":
            n = int(_need(params, "n", name))
            sigma = [int(s) for s in _need(params, "sigma", name).split(",")]
            model = CheckerboardPermutation(n, sigma)
        elif name == "ordsum":
            model = OrdinalSumPi(float(_need(params, "b", name)))
        elif name == "cube":
            model = Cube3D(swapped=params.pop("swapped", "0") in ("1", "true"))
        elif name == "mo":
            model = MarshallOlkin(float(_need(params, "alpha", name)),
                                  float(_need(params, "beta", name)))
        elif name == "clayton":
            model = Clayton(float(_need(params, "theta", name)))
        elif name == "qbk":
            model = QuantileBoundKernel(float(_need(params, "tau", name)),
                                        params.pop("mode", "lower"),
                                        int(params.pop("n", "100")))
        else:
            raise FamilyParseError(f"unknown family {name!r}")
    except FamilyParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise FamilyParseError(f"invalid parameters for {name!r}: {exc}") from exc
    if params:
        raise FamilyParseError(
            f"unknown parameters for {name!r}: {', '.join(sorted(params))}")
    return model
