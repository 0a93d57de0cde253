"""Shared model sets for the property suites."""

import numpy as np
import pytest

from copreg import (
    CheckerboardPermutation,
    Clayton,
    CompletelyDependent,
    Cube3D,
    GridCopula,
    MarshallOlkin,
    OrdinalSumPi,
    PiecewiseMap,
    Product,
    QuantileBoundKernel,
    aggregate,
    comonotone,
)


def one_dim_models():
    """Every bivariate family at its reference parameters."""
    return [
        Product(),
        comonotone(),
        comonotone().flip(),
        # dyadic shift keeps indicator jumps within the 1e-4 margin tolerance
        # under 4096-cell midpoint counting
        CompletelyDependent(PiecewiseMap.shift(0.25)),
        CheckerboardPermutation(2, (2, 1)),
        CheckerboardPermutation(3, (2, 3, 1)),
        OrdinalSumPi(0.25),
        MarshallOlkin(0.35, 0.65),
        Clayton(2.0),
        QuantileBoundKernel(0.3, "lower"),
        QuantileBoundKernel(0.3, "upper", 100),
        MarshallOlkin(0.35, 0.65).flip(),
        GridCopula(aggregate(MarshallOlkin(0.35, 0.65), 8)),
    ]


def all_models():
    return one_dim_models() + [Cube3D(), Cube3D().flip(), Product(covariate_dim=2)]


def metric_models():
    """The pair set for the metric-axiom and bound suites."""
    return [
        Product(),
        comonotone(),
        comonotone().flip(),
        Clayton(2.0),
        MarshallOlkin(0.35, 0.65),
    ]


def pytest_make_parametrize_id(config, val, argname):
    if not isinstance(val, type) and hasattr(val, "describe"):
        return val.describe()
    return None


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
