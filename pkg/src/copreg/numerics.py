"""Deterministic quadrature, monotone inversion, and reproducible RNG streams.

Every integral in the package is a composite midpoint rule on [0,1] (or a
product of such rules per axis), controlled by a single ``cells`` parameter.
Quantile inversion is derivative-free bisection, since conditional CDFs may
carry atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, EvaluationError

__all__ = [
    "QuadratureSpec",
    "RngStream",
    "DEFAULT_QUAD",
    "DEFAULT_QUAD_2D",
    "DEFAULT_TOL",
    "midpoints",
    "integrate_1d",
    "integrate_2d",
    "invert_monotone",
    "invert_monotone_array",
]

DEFAULT_TOL = 1e-10


def midpoints(cells: int) -> np.ndarray:
    """Midpoints (k - 1/2)/cells, k = 1..cells, of a uniform partition of [0,1]."""
    return (np.arange(cells, dtype=float) + 0.5) / cells


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite midpoint rule with ``cells`` equal subintervals per axis.

    The weights are 1/cells each, so the total weight over [0,1] is exactly 1.
    """

    cells: int = 4096

    def __post_init__(self) -> None:
        if self.cells < 1:
            raise ValueError(f"cells must be >= 1, got {self.cells}")

    def midpoints(self) -> np.ndarray:
        return midpoints(self.cells)

    def outer(self) -> "QuadratureSpec":
        """Coarser companion rule for the outer level of nested integrals.

        Uses cells//4 so outer midpoints (4j-2)/cells coincide with inner cell
        boundaries; jumps located at outer midpoints are then counted exactly
        by the inner rule instead of incurring an O(1/cells) bias.
        """
        return QuadratureSpec(max(self.cells // 4, 16))


DEFAULT_QUAD = QuadratureSpec(4096)
DEFAULT_QUAD_2D = QuadratureSpec(512)


def _evaluate(f: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate f on an array, falling back to a scalar loop."""
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(f(x)) for x in xs])


def _check_finite(vals: np.ndarray, xs: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(vals)
    if bad.any():
        where = np.argwhere(bad)[0]
        loc = xs[tuple(where)] if xs.ndim > 1 else xs[where[0]]
        raise EvaluationError(f"non-finite {what} value at midpoint {loc!r}")


def integrate_1d(f: Callable, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Integral of f over [0,1] by the composite midpoint rule.

    Raises EvaluationError naming the midpoint if f is non-finite there.
    """
    xs = quad.midpoints()
    vals = _evaluate(f, xs)
    _check_finite(vals, xs, "integrand")
    return float(vals.mean())


def integrate_2d(f: Callable, quad: QuadratureSpec = DEFAULT_QUAD_2D) -> float:
    """Integral of f(x1, x2) over [0,1]^2 by the midpoint product rule."""
    m = quad.midpoints()
    x1, x2 = np.meshgrid(m, m, indexing="ij")
    vals = np.asarray(f(x1, x2), dtype=float)
    if vals.shape != x1.shape:
        vals = np.broadcast_to(vals, x1.shape)
    _check_finite(vals, np.stack([x1, x2], axis=-1), "integrand")
    return float(vals.mean())


def invert_monotone(F: Callable[[float], float], target: float,
                    tol: float = DEFAULT_TOL) -> float:
    """Generalized inverse inf{y in [0,1] : F(y) >= target} by bisection.

    F must be nondecreasing on [0,1].  If F jumps across the target, the
    jump location is returned (to within tol).  Raises DomainError when
    F(1) < target, which cannot happen for a proper conditional CDF.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not 0.0 <= target <= 1.0:
        raise DomainError(f"target must lie in [0,1], got {target}")
    if float(F(1.0)) < target:
        raise DomainError(f"F(1) = {float(F(1.0))} < target {target}; "
                          "not a proper conditional CDF")
    if float(F(0.0)) >= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(F(mid)) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def invert_monotone_array(F: Callable[[np.ndarray], np.ndarray],
                          targets: np.ndarray,
                          tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized bisection: F maps a y-array to CDF values elementwise.

    Returns inf{y : F(y) >= target} per entry; same contract as
    :func:`invert_monotone`.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    targets = np.asarray(targets, dtype=float)
    if ((targets < 0.0) | (targets > 1.0)).any():
        raise DomainError("targets must lie in [0,1]")
    top = np.asarray(F(np.ones_like(targets)), dtype=float)
    if (top < targets).any():
        raise DomainError("F(1) < target for some entries; "
                          "not a proper conditional CDF")
    lo = np.zeros_like(targets)
    hi = np.ones_like(targets)
    at_zero = np.asarray(F(np.zeros_like(targets)), dtype=float) >= targets
    n_iter = int(np.ceil(np.log2(1.0 / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        ge = np.asarray(F(mid), dtype=float) >= targets
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    out = np.where(at_zero, 0.0, hi)
    return out


@dataclass(frozen=True)
class RngStream:
    """Reproducible, splittable random stream (counter-based Philox).

    Two streams with equal (seed, stream_index) yield bit-identical
    sequences; distinct stream_index values yield statistically independent
    ones.  A stream value is immutable; ``generator()`` returns a fresh
    numpy Generator positioned at the stream origin, so operations consuming
    a stream are pure functions of their inputs.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_index < 0:
            raise ValueError(f"stream_index must be >= 0, got {self.stream_index}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.Philox(ss))
