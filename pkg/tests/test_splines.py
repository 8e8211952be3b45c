import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamspline.splines import (
    DEFAULT_ORDER,
    SplineBasis,
    basis_integrals,
    build_basis,
    choose_num_basis,
    eval_basis,
    eval_basis_matrix,
)


def random_basis(rng, order=4, max_interior=8):
    """A valid clamped basis with random strictly increasing interior knots."""
    n_interior = int(rng.integers(0, max_interior + 1))
    interior = np.sort(rng.uniform(0.05, 0.95, size=n_interior))
    while np.any(np.diff(interior) < 1e-3):
        interior = np.sort(rng.uniform(0.05, 0.95, size=n_interior))
    knots = np.concatenate([np.zeros(order), interior, np.ones(order)])
    return SplineBasis(order=order, num_basis=order + n_interior, knots=knots)


class TestChooseNumBasis:
    def test_known_values(self):
        # Verified against mpmath below: 2*100**0.2 = 5.0238..., 2*72475**0.2
        # = 18.7536..., 2*1**0.2 = 2 clamped up to the order.
        assert choose_num_basis(100) == 5
        assert choose_num_basis(72475) == 19
        assert choose_num_basis(1) == 4

    def test_agrees_with_arbitrary_precision(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 50
        for n in (1, 2, 100, 999, 72475, 10**6):
            exact = 2 * mpmath.mpf(n) ** (mpmath.mpf(1) / 5)
            expected = max(int(mpmath.floor(exact + mpmath.mpf("0.5"))), 4)
            assert choose_num_basis(n) == expected

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            choose_num_basis(0)

    def test_clamped_at_order(self):
        assert choose_num_basis(1, order=6) == 6
        assert choose_num_basis(2, order=4) == 4  # 2*2**0.2 = 2.30 -> 2 -> clamp

    def test_monotone_in_n(self):
        values = [choose_num_basis(n) for n in range(1, 5000, 37)]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestBuildBasis:
    def test_uniform_grid_thirds(self):
        values = np.linspace(1 / 1000, 999 / 1000, 999)
        basis = build_basis(values, 6, 4)
        assert basis.num_basis == 6
        np.testing.assert_allclose(basis.interior_knots, [1 / 3, 2 / 3], atol=2e-3)

    def test_tied_values_collapse(self):
        basis = build_basis(np.full(50, 0.5), 6, 4)
        assert basis.num_basis == 5
        np.testing.assert_array_equal(basis.interior_knots, [0.5])

    def test_no_interior_is_bernstein(self):
        basis = build_basis(np.array([0.2, 0.8]), 4, 4)
        assert basis.interior_knots.size == 0
        np.testing.assert_array_equal(basis.knots, [0, 0, 0, 0, 1, 1, 1, 1])

    def test_boundary_quantiles_dropped(self):
        # Quantiles hitting 0 collapse into the clamp instead of duplicating it.
        values = np.concatenate([np.zeros(90), np.linspace(0.5, 1.0, 10)])
        basis = build_basis(values, 6, 4)
        assert np.all(basis.interior_knots > 0.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            build_basis(np.array([]), 6, 4)
        with pytest.raises(ValueError):
            build_basis(np.array([0.5, 1.7]), 6, 4)
        with pytest.raises(ValueError):
            build_basis(np.array([0.5, -0.1]), 6, 4)
        with pytest.raises(ValueError):
            build_basis(np.array([0.5]), 3, 4)

    def test_invariants_validated(self):
        with pytest.raises(ValueError):
            SplineBasis(order=4, num_basis=5, knots=np.array([0, 0, 0, 0, 2, 1, 1, 1, 1.0]))
        with pytest.raises(ValueError):
            SplineBasis(order=4, num_basis=4, knots=np.array([0, 0, 0, 0.1, 1, 1, 1, 1.0]))


class TestEvalBasis:
    def test_clamped_endpoints(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            basis = random_basis(rng)
            at0 = eval_basis(basis, 0.0)
            at1 = eval_basis(basis, 1.0)
            expected0 = np.zeros(basis.num_basis)
            expected0[0] = 1.0
            expected1 = np.zeros(basis.num_basis)
            expected1[-1] = 1.0
            np.testing.assert_array_equal(at0, expected0)
            np.testing.assert_array_equal(at1, expected1)

    def test_out_of_range_clamped(self):
        basis = build_basis(np.linspace(0.01, 0.99, 100), 6, 4)
        np.testing.assert_array_equal(eval_basis(basis, -0.5), eval_basis(basis, 0.0))
        np.testing.assert_array_equal(eval_basis(basis, 1.5), eval_basis(basis, 1.0))

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        x=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    )
    def test_partition_of_unity_and_nonnegativity(self, seed, x):
        basis = random_basis(np.random.default_rng(seed))
        values = eval_basis(basis, x)
        assert abs(values.sum() - 1.0) < 1e-12
        assert np.all(values >= 0.0)
        assert np.count_nonzero(values) <= basis.order

    def test_local_support(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            basis = random_basis(rng)
            x = rng.uniform(0, 1, 500)
            matrix = eval_basis_matrix(basis, x)
            for k in range(basis.num_basis):
                lo = basis.knots[k]
                hi = basis.knots[k + basis.order]
                outside = (x < lo) | (x > hi)
                assert np.all(matrix[outside, k] == 0.0)

    def test_matches_scipy(self):
        BSpline = pytest.importorskip("scipy.interpolate").BSpline
        rng = np.random.default_rng(7)
        for _ in range(10):
            basis = random_basis(rng)
            x = rng.uniform(0, 1, 300)
            matrix = eval_basis_matrix(basis, x)
            for k in range(basis.num_basis):
                coef = np.zeros(basis.num_basis)
                coef[k] = 1.0
                reference = BSpline(basis.knots, coef, basis.order - 1)(x)
                np.testing.assert_allclose(matrix[:, k], reference, atol=1e-12)

    def test_c2_continuity_at_interior_knots(self):
        # One-sided 4-point stencils are exact for cubics, so matching
        # derivative estimates from both sides verifies C1 across each knot;
        # values are compared by cubic extrapolation from the left.
        rng = np.random.default_rng(23)
        basis = random_basis(rng, max_interior=5)
        while basis.interior_knots.size == 0:
            basis = random_basis(rng, max_interior=5)
        spans = np.diff(np.concatenate([[0.0], basis.interior_knots, [1.0]]))
        h = spans.min() / 8.0
        for knot in basis.interior_knots:
            for k in range(basis.num_basis):

                def f(x):
                    return eval_basis(basis, x)[k]

                left_deriv = (
                    11 * f(knot) - 18 * f(knot - h) + 9 * f(knot - 2 * h) - 2 * f(knot - 3 * h)
                ) / (6 * h)
                right_deriv = -(
                    11 * f(knot) - 18 * f(knot + h) + 9 * f(knot + 2 * h) - 2 * f(knot + 3 * h)
                ) / (6 * h)
                assert abs(left_deriv - right_deriv) < 1e-6
                left_value = 4 * f(knot - h) - 6 * f(knot - 2 * h) + 4 * f(knot - 3 * h) - f(
                    knot - 4 * h
                )
                assert abs(left_value - f(knot)) < 1e-6


class TestBasisIntegrals:
    def test_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            basis = random_basis(rng)
            integrals = basis_integrals(basis)
            assert np.all(integrals > 0.0)
            assert abs(integrals.sum() - 1.0) < 1e-12

    def test_bernstein_quarters(self):
        basis = build_basis(np.array([0.5]), 4, 4)
        np.testing.assert_allclose(basis_integrals(basis), 0.25, atol=1e-15)

    def test_riemann_oracle_known_knots(self):
        # Midpoint Riemann sum with 1e6 cells as the independent oracle.
        basis = SplineBasis(
            order=4,
            num_basis=6,
            knots=np.array([0, 0, 0, 0, 1 / 3, 2 / 3, 1, 1, 1, 1.0]),
        )
        grid = (np.arange(1_000_000) + 0.5) / 1_000_000
        oracle = eval_basis_matrix(basis, grid).mean(axis=0)
        np.testing.assert_allclose(basis_integrals(basis), oracle, atol=1e-8)

    def test_riemann_oracle_random_bases(self):
        rng = np.random.default_rng(17)
        grid = (np.arange(200_000) + 0.5) / 200_000
        for _ in range(5):
            basis = random_basis(rng)
            oracle = eval_basis_matrix(basis, grid).mean(axis=0)
            np.testing.assert_allclose(basis_integrals(basis), oracle, atol=1e-8)


def test_serialization_roundtrip():
    rng = np.random.default_rng(29)
    basis = random_basis(rng)
    restored = SplineBasis.from_dict(basis.to_dict())
    assert restored.order == basis.order
    assert restored.num_basis == basis.num_basis
    np.testing.assert_array_equal(restored.knots, basis.knots)
