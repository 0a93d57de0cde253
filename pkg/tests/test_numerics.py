import numpy as np
import pytest
from numpy.testing import assert_allclose

from copreg.errors import DomainError, EvaluationError
from copreg.numerics import (
    QuadratureSpec,
    RngStream,
    integrate_1d,
    integrate_2d,
    invert_monotone,
    invert_monotone_array,
    midpoints,
)


class TestQuadrature:
    def test_constant(self):
        assert integrate_1d(lambda y: np.ones_like(y), QuadratureSpec(10)) == 1.0

    @pytest.mark.parametrize("cells", [1, 7, 100, 4096])
    def test_affine_exact(self, cells):
        # midpoint rule is exact for affine integrands
        assert_allclose(integrate_1d(lambda y: y, QuadratureSpec(cells)), 0.5,
                        rtol=0, atol=1e-15)

    def test_tent_function(self):
        # closed-form antiderivative: int 2 min{y, 1-y} dy = 1/2
        val = integrate_1d(lambda y: 2 * np.minimum(y, 1 - y), QuadratureSpec(1000))
        assert_allclose(val, 0.5, atol=1e-6)

    def test_total_weight_is_one(self):
        for cells in (1, 3, 4096):
            assert integrate_1d(lambda y: np.ones_like(y), QuadratureSpec(cells)) == 1.0

    def test_midpoint_layout(self):
        assert_allclose(midpoints(4), [0.125, 0.375, 0.625, 0.875])

    def test_linear_in_integrand(self):
        quad = QuadratureSpec(257)
        f = lambda y: y ** 2
        g = lambda y: np.cos(y)
        lhs = integrate_1d(lambda y: 2.0 * f(y) + 3.0 * g(y), quad)
        rhs = 2.0 * integrate_1d(f, quad) + 3.0 * integrate_1d(g, quad)
        assert_allclose(lhs, rhs, rtol=1e-14)

    def test_monotone_in_integrand(self):
        quad = QuadratureSpec(100)
        assert integrate_1d(lambda y: y, quad) <= integrate_1d(lambda y: y + 0.1, quad)

    def test_scalar_fallback(self):
        # integrands that only accept scalars still work
        val = integrate_1d(lambda y: float(y) ** 3, QuadratureSpec(512))
        assert_allclose(val, 0.25, atol=1e-6)

    def test_nonfinite_names_midpoint(self):
        def bad(y):
            return np.where(np.isclose(y, 0.375), np.inf, y)

        with pytest.raises(EvaluationError, match="0.375"):
            integrate_1d(bad, QuadratureSpec(4))

    def test_invalid_cells(self):
        with pytest.raises(ValueError):
            QuadratureSpec(0)

    def test_2d(self):
        assert_allclose(integrate_2d(lambda a, b: a * b, QuadratureSpec(64)),
                        0.25, atol=1e-12)

    def test_outer_is_dyadic(self):
        assert QuadratureSpec(4096).outer().cells == 1024
        assert QuadratureSpec(20).outer().cells == 16


class TestInversion:
    def test_identity_cdf(self):
        assert_allclose(invert_monotone(lambda y: y, 0.3, 1e-10), 0.3, atol=1e-9)

    def test_cube_root(self):
        # oracle: direct exponentiation 0.125**(1/3) = 0.5
        assert_allclose(invert_monotone(lambda y: y ** 3, 0.125, 1e-12), 0.5,
                        atol=1e-10)

    def test_atom_absorbs(self):
        step = lambda y: 1.0 if y >= 0.4 else 0.0
        assert_allclose(invert_monotone(step, 0.7, 1e-10), 0.4, atol=1e-9)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            invert_monotone(lambda y: 0.5 * y, 0.9)

    def test_target_at_zero(self):
        assert invert_monotone(lambda y: 0.2 + 0.8 * y, 0.1) == 0.0

    def test_upper_bound_property(self):
        # invert(F, F(y*)) <= y* + tol for continuous strictly increasing F
        f = lambda y: y ** 2
        for ystar in (0.1, 0.5, 0.9):
            assert invert_monotone(f, f(ystar), 1e-10) <= ystar + 1e-10

    def test_array_matches_scalar(self):
        targets = np.array([0.05, 0.125, 0.7, 1.0])
        got = invert_monotone_array(lambda ys: ys ** 3, targets, 1e-12)
        want = [invert_monotone(lambda y: y ** 3, t, 1e-12) for t in targets]
        assert_allclose(got, want, atol=1e-10)

    def test_array_domain_error(self):
        with pytest.raises(DomainError):
            invert_monotone_array(lambda ys: 0.5 * ys, np.array([0.2, 0.9]))


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(12345, 3).generator().random(32)
        b = RngStream(12345, 3).generator().random(32)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(12345, 0).generator().random(32)
        b = RngStream(12345, 1).generator().random(32)
        assert not np.array_equal(a, b)

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(0, -2)

    def test_generator_fresh_each_call(self):
        s = RngStream(9, 0)
        assert np.array_equal(s.generator().random(8), s.generator().random(8))
