"""Copula-based mean and quantile regression toolkit."""

from .numerics import QuadratureSpec, RngStream, integrate_1d, integrate_2d, \
    invert_monotone
from .families import CheckerboardPermutation, Clayton, CompletelyDependent, \
    CopulaModel, Cube3D, FlippedModel, MarshallOlkin, OrdinalSumPi, \
    PiecewiseMap, Product, QuantileBoundKernel, comonotone, parse_family, sample
from .checkerboard import CheckerboardGrid, GridCopula, RankedSample, \
    aggregate, empirical_checkerboard, grid_kernel_cdf, marginalize_3d, \
    pseudo_ranks, read_grid, write_grid
# note: the regression *function* is not re-exported here; the name is the
# submodule (copreg.regression.regression). regression_values is the array API.
from .regression import StepFunction1D, SurvivalCurve, decreasing_rearrangement, \
    grid_lp_deviation, grid_quantile, grid_regression, lp_deviation, \
    mean_of_regression, quantile, quantile_average, quantile_average_over_tau, \
    regression_values, quantile_values, survival_mbar
from .metrics import BoundReport, d_metric, phi, quantile_distance, \
    quantile_metric_identity, regression_distance, verify_bounds
from .simulate import ErrorTable, ExperimentConfig, emit_density, \
    run_convergence, summarize_boxplot

__version__ = "0.1.0"
