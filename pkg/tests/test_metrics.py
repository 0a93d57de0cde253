import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from copreg import (
    Clayton,
    Cube3D,
    MarshallOlkin,
    Product,
    QuadratureSpec,
    comonotone,
    d_metric,
    phi,
    quantile_distance,
    quantile_metric_identity,
    regression_distance,
    verify_bounds,
)
from copreg.errors import PreconditionError, UsageError

from conftest import metric_models

QUAD = QuadratureSpec(1024)  # property-suite resolution; tolerances account


class TestPhi:
    def test_same_model_zero(self):
        m = Clayton(2.0)
        for y in (0.0, 0.3, 1.0):
            assert phi(m, m, y, 1.0, QUAD) == 0.0

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_boundary_values(self, pair):
        # zero up to pow-roundtrip rounding of the Clayton kernel at y=1
        assert phi(pair[0], pair[1], 0.0, 1.0, QUAD) <= 1e-12
        assert phi(pair[0], pair[1], 1.0, 1.0, QUAD) <= 1e-12

    def test_comonotone_vs_flip_paper_value(self):
        m = comonotone()
        assert_allclose(phi(m, m.flip(), 0.3, 1.0), 0.6, atol=1e-12)

    def test_cd_pair_value_independent_of_p(self):
        m = comonotone()
        for p in (1.0, 1.7, 3.0):
            assert_allclose(phi(m, m.flip(), 0.2, p), 0.4, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            phi(Product(), Cube3D(), 0.5)

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_sharp_bound(self, pair):
        # Phi(y) <= 2 min{y, 1-y}; quadrature pairs have >= 0.1 margin,
        # the completely dependent pair is computed exactly
        for y in np.linspace(0.0, 1.0, 101):
            val = phi(pair[0], pair[1], float(y), 1.0, QUAD)
            assert val <= 2.0 * min(y, 1.0 - y) + 1e-6

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_lipschitz_p1(self, pair):
        ys = np.linspace(0.0, 1.0, 101)
        vals = np.array([phi(pair[0], pair[1], float(y), 1.0, QUAD) for y in ys])
        jumps = np.abs(np.diff(vals))
        assert (jumps <= 2.0 * np.diff(ys) + 1e-6).all()

    def test_p2_continuity_under_refinement(self):
        # max adjacent jump shrinks as the y-grid refines
        c1, c2 = MarshallOlkin(0.35, 0.65), Clayton(2.0)
        max_jumps = []
        for pts in (26, 101, 401):
            ys = np.linspace(0.0, 1.0, pts)
            vals = np.array([phi(c1, c2, float(y), 2.0, QUAD) for y in ys])
            max_jumps.append(np.abs(np.diff(vals)).max())
        assert max_jumps[0] > max_jumps[1] > max_jumps[2]


class TestDMetric:
    def test_zero_on_diagonal(self):
        for m in metric_models():
            assert d_metric(m, m, 1.0, QUAD) == 0.0

    def test_diameter_attained(self):
        m = comonotone()
        assert_allclose(d_metric(m, m.flip(), 1.0), 0.5, atol=1e-5)

    def test_diameter_p2(self):
        m = comonotone()
        assert_allclose(d_metric(m, m.flip(), 2.0), 2 ** -0.5, atol=1e-5)

    def test_cube_vs_product(self):
        # closed form: Phi(y) = min{y, 1-y}, integral 1/4
        got = d_metric(Cube3D(), Product(covariate_dim=2), 1.0)
        assert_allclose(got, 0.25, atol=1e-5)

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_diameter_bound(self, pair):
        for p in (1.0, 2.0):
            assert d_metric(*pair, p, QUAD) <= 2.0 ** (-1.0 / p) + 1e-6

    def test_symmetry_exact(self):
        for c1, c2 in itertools.combinations(metric_models(), 2):
            assert d_metric(c1, c2, 1.0, QUAD) == d_metric(c2, c1, 1.0, QUAD)

    def test_triangle_inequality(self):
        models = metric_models()
        dist = {}
        for c1, c2 in itertools.combinations(models, 2):
            d = d_metric(c1, c2, 1.0, QUAD)
            dist[(c1.describe(), c2.describe())] = d
            dist[(c2.describe(), c1.describe())] = d
        names = [m.describe() for m in models]
        for a in names:
            dist[(a, a)] = 0.0
        for a, b, c in itertools.permutations(names, 3):
            assert dist[(a, c)] <= dist[(a, b)] + dist[(b, c)] + 1e-6

    def test_distinct_models_separated(self):
        for c1, c2 in itertools.combinations(metric_models(), 2):
            assert d_metric(c1, c2, 1.0, QUAD) > 1e-3


class TestRegressionDistance:
    def test_zero_on_diagonal(self):
        m = MarshallOlkin(0.35, 0.65)
        assert regression_distance(m, m, 1.0, QUAD) == 0.0

    def test_comonotone_pair_attains_corollary(self):
        m = comonotone()
        assert_allclose(regression_distance(m, m.flip(), 1.0), 0.5, atol=1e-6)
        assert_allclose(regression_distance(m, m.flip(), 2.0), 3 ** -0.5,
                        atol=1e-6)

    def test_cube_vs_product(self):
        got = regression_distance(Cube3D(), Product(covariate_dim=2), 1.0)
        assert_allclose(got, 0.25, atol=1e-9)

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_dominated_by_metric(self, pair):
        for p in (1.0, 2.0):
            rd = regression_distance(*pair, p, QUAD)
            dm = d_metric(*pair, p, QUAD)
            assert rd <= dm + 1e-6, (pair[0].describe(), pair[1].describe(), p)


class TestQuantileIdentity:
    def test_same_model(self):
        m = Clayton(2.0)
        lhs, rhs = quantile_metric_identity(m, m, QUAD)
        assert lhs == 0.0 and rhs == 0.0

    def test_cube_vs_product(self):
        lhs, rhs = quantile_metric_identity(Cube3D(), Product(covariate_dim=2))
        assert_allclose(lhs, 0.25, atol=1e-5)
        assert_allclose(rhs, 0.25, atol=1e-12)  # |Q - tau| = 1/4 for every tau

    def test_comonotone_pair(self):
        lhs, rhs = quantile_metric_identity(comonotone(), comonotone().flip())
        assert_allclose(lhs, 0.5, atol=1e-3)
        assert_allclose(rhs, 0.5, atol=1e-3)

    @pytest.mark.parametrize("pair", list(itertools.combinations(metric_models(), 2)))
    def test_identity_gap(self, pair):
        lhs, rhs = quantile_metric_identity(*pair, QUAD)
        assert abs(lhs - rhs) <= 2e-3, (pair[0].describe(), pair[1].describe())
        assert lhs <= 0.5 + 1e-6 and rhs <= 0.5 + 1e-6

    def test_quantile_distance_helper(self):
        got = quantile_distance(Cube3D(), Product(covariate_dim=2), 0.5, 1.0)
        assert_allclose(got, 0.25, atol=1e-9)


class TestConvergenceProxy:
    def test_metric_convergence_implies_regression_convergence(self):
        # Clayton theta -> 2: both distances to Clayton(2) shrink and the
        # regression distance stays below the metric
        target = Clayton(2.0)
        previous_d = previous_r = np.inf
        for theta in (1.5, 1.9, 1.99):
            c = Clayton(theta)
            d = d_metric(c, target, 1.0, QUAD)
            r = regression_distance(c, target, 1.0, QUAD)
            assert r <= d + 1e-6
            assert d < previous_d and r < previous_r
            previous_d, previous_r = d, r


class TestVerifyBounds:
    def test_mean_lp_attainment(self):
        report = verify_bounds(comonotone(), ["mean_lp"], p_list=[1.0])
        check = report.checks[0]
        assert_allclose(check.computed, 0.25, atol=1e-6)
        assert_allclose(check.bound, 0.25)
        assert abs(check.slack) < 1e-6
        assert check.passed

    def test_mbar_attainment(self):
        from copreg import OrdinalSumPi
        report = verify_bounds(OrdinalSumPi(0.2), ["mbar"], a_grid=[0.4])
        check = report.checks[0]
        assert_allclose(check.computed, 0.4, atol=1e-12)
        assert_allclose(check.bound, 0.4, atol=1e-12)
        assert check.passed

    def test_quantile_avg_product(self):
        report = verify_bounds(Product(), ["quantile_avg"], tau_list=[0.3])
        assert all(c.passed for c in report.checks)
        lower, upper = report.checks
        assert_allclose(lower.computed, 0.3, atol=1e-12)
        assert lower.params["side"] == "lower" and upper.params["side"] == "upper"

    def test_pair_tags_need_second(self):
        with pytest.raises(UsageError):
            verify_bounds(Product(), ["diameter"])

    def test_unknown_tag(self):
        with pytest.raises(UsageError):
            verify_bounds(Product(), ["nosuchbound"])

    def test_violations_reported_not_raised(self):
        # impossible tolerance manufactures a failing check without raising
        report = verify_bounds(comonotone(), ["mean_lp"], p_list=[1.0], tol=-1.0)
        assert not report.checks[0].passed
        assert not report.all_passed

    def test_json_schema(self):
        import json
        report = verify_bounds(Product(), ["mean_lp"], p_list=[1.0])
        payload = json.loads(report.to_json())
        assert set(payload) == {"model", "checks", "tolerances"}
        assert set(payload["checks"][0]) == {"tag", "params", "computed",
                                             "bound", "slack", "pass"}

    def test_pair_report(self):
        m = comonotone()
        report = verify_bounds(m, ["diameter", "reg_le_metric",
                                   "reg_distance_bound", "quantile_identity"],
                               second=m.flip(), p_list=[1.0], quad=QUAD)
        assert report.all_passed
