import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import discrete_1d, simplex_vec
from otstat import (
    Grid,
    GridMeasure,
    QuantileCurve,
    bin_to_grid,
    clamp_interior,
    empirical_measure,
    grid_measure,
    measure_from_quantile,
    quantile_curve,
    w2_1d,
    w2_1d_squared,
)


class TestEmpiricalMeasure:
    def test_uniform(self):
        m = empirical_measure([1, 3])
        np.testing.assert_array_equal(m.points, [1, 3])
        np.testing.assert_allclose(m.weights, [0.5, 0.5])

    def test_duplicates_merged(self):
        m = empirical_measure([2, 2, 5])
        np.testing.assert_array_equal(m.points, [2, 5])
        np.testing.assert_allclose(m.weights, [2 / 3, 1 / 3])

    def test_sorted(self):
        np.testing.assert_array_equal(empirical_measure([0.7, 0.1, 0.4]).points, [0.1, 0.4, 0.7])

    def test_weights_renormalized(self):
        m = empirical_measure([0, 1], [1, 3])
        np.testing.assert_allclose(m.weights, [0.25, 0.75])

    def test_2d_duplicates(self):
        m = empirical_measure([[0, 1], [0, 1], [1, 0]])
        assert m.dim == 2 and m.size == 2

    @pytest.mark.parametrize("pts, w", [([], None), ([1, 2], [0, 0]), ([1, 2], [1]),
                                        ([1, 2], [1, -1])])
    def test_errors(self, pts, w):
        with pytest.raises(ValueError):
            empirical_measure(pts, w)

    def test_mixed_dimensions(self):
        with pytest.raises(ValueError):
            empirical_measure([[0.0], [1.0, 2.0]])

    def test_immutable(self):
        m = empirical_measure([1, 2])
        with pytest.raises(ValueError):
            m.weights[0] = 1.0

    @given(discrete_1d())
    def test_invariants(self, data):
        m = empirical_measure(*data)
        assert abs(m.weights.sum() - 1) <= 1e-12
        assert np.all(np.diff(m.points) > 0)


class TestQuantileCurve:
    def test_point_mass(self):
        np.testing.assert_array_equal(quantile_curve(empirical_measure([3]), 4).values, [3] * 4)

    def test_two_atoms(self):
        np.testing.assert_array_equal(quantile_curve(empirical_measure([0, 1]), 4).values,
                                      [0, 0, 1, 1])

    def test_three_atoms(self):
        np.testing.assert_array_equal(quantile_curve(empirical_measure([1, 2, 3]), 3).values,
                                      [1, 2, 3])

    def test_requires_1d(self):
        with pytest.raises(ValueError):
            quantile_curve(empirical_measure([[0, 1]]), 4)

    def test_level_count(self):
        with pytest.raises(ValueError):
            QuantileCurve([1.0])

    def test_not_monotone(self):
        with pytest.raises(ValueError):
            QuantileCurve([2.0, 1.0])

    @given(discrete_1d(), st.integers(2, 200))
    def test_nondecreasing(self, data, M):
        assert np.all(np.diff(quantile_curve(empirical_measure(*data), M).values) >= 0)


class TestMeasureFromQuantile:
    @pytest.mark.parametrize("values, pts, w", [
        ([3, 3, 3, 3], [3], [1]),
        ([0, 0, 1, 1], [0, 1], [0.5, 0.5]),
        ([1, 2, 3], [1, 2, 3], [1 / 3] * 3),
    ])
    def test_examples(self, values, pts, w):
        m = measure_from_quantile(QuantileCurve(values))
        np.testing.assert_array_equal(m.points, pts)
        np.testing.assert_allclose(m.weights, w)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.sampled_from([8, 16, 40]))
    def test_round_trip_exact_on_lattice_weights(self, pts, M):
        # weights that are multiples of 1/M survive the round trip exactly
        rng = np.random.default_rng(len(pts))
        counts = rng.multinomial(M - len(pts), np.ones(len(pts)) / len(pts)) + 1
        mu = empirical_measure(pts, counts)
        back = measure_from_quantile(quantile_curve(mu, M))
        # squared: rounding in cumulative weights leaves slivers of width ~1e-17
        assert w2_1d_squared(mu, back) <= 1e-14

    def test_round_trip_converges(self):
        mu = empirical_measure([0.0, 1.0, 5.0], [0.3, 0.3, 0.4])
        errs = [w2_1d(mu, measure_from_quantile(quantile_curve(mu, M))) for M in (7, 71, 703)]
        assert errs[0] > errs[1] > errs[2]


class TestGrid:
    def test_nodes_row_major(self):
        g = Grid((0, 0), (1, 2), (2, 3))
        assert g.size == 6
        np.testing.assert_array_equal(g.nodes[:3], [[0, 0], [0, 1], [0, 2]])

    @pytest.mark.parametrize("args", [((0,), (1,), (1,)), ((1,), (0,), (3,)),
                                      ((0, 0, 0), (1, 1, 1), (2, 2, 2))])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Grid(*args)

    def test_grid_measure_checks(self):
        g = Grid.line(0, 1, 2)
        with pytest.raises(ValueError):
            GridMeasure(g, [0.5, 0.6])
        with pytest.raises(ValueError):
            GridMeasure(g, [1.5, -0.5])


class TestBinning:
    g = Grid.line(0, 2, 3)

    def test_nearest(self):
        np.testing.assert_array_equal(bin_to_grid(empirical_measure([0.6]), self.g).weights,
                                      [0, 1, 0])

    def test_split(self):
        np.testing.assert_allclose(bin_to_grid(empirical_measure([0.1, 1.9]), self.g).weights,
                                   [0.5, 0, 0.5])

    def test_tie_goes_to_lower_index(self):
        g = Grid.line(0, 1, 2)
        np.testing.assert_array_equal(bin_to_grid(empirical_measure([0.5]), g).weights, [1, 0])

    def test_2d_tie(self):
        g = Grid((0, 0), (1, 1), (2, 2))
        np.testing.assert_array_equal(bin_to_grid(empirical_measure([[0.5, 0.5]]), g).weights,
                                      [1, 0, 0, 0])

    def test_outside_by_less_than_spacing(self):
        np.testing.assert_array_equal(bin_to_grid(empirical_measure([-0.9]), self.g).weights,
                                      [1, 0, 0])

    def test_too_far(self):
        with pytest.raises(ValueError):
            bin_to_grid(empirical_measure([-1.5]), self.g)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            bin_to_grid(empirical_measure([[0, 0]]), self.g)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(2, 40))
    def test_mass_and_error(self, pts, n):
        g = Grid.line(0, 1, n)
        mu = empirical_measure(pts)
        b = bin_to_grid(mu, g)
        assert abs(b.weights.sum() - 1) <= 1e-12
        # every atom moves by at most half a spacing
        assert w2_1d(mu, b.to_discrete()) <= 0.5 * g.spacing[0] + 1e-12


class TestClamp:
    def test_two(self):
        g = Grid.line(0, 1, 2)
        np.testing.assert_allclose(clamp_interior(GridMeasure(g, [1, 0]), 0.1).weights, [0.9, 0.1])

    def test_three(self):
        g = Grid.line(0, 1, 3)
        np.testing.assert_allclose(clamp_interior(GridMeasure(g, [0.5, 0.5, 0]), 0.05).weights,
                                   [0.475, 0.475, 0.05])

    def test_uniform_fixed(self):
        g = Grid.line(0, 1, 4)
        c = clamp_interior(GridMeasure(g, np.full(4, 0.25)), 0.1)
        np.testing.assert_allclose(c.weights, 0.25)
        assert c.interior

    @pytest.mark.parametrize("rho", [0.0, 0.5, -0.1])
    def test_range(self, rho):
        with pytest.raises(ValueError):
            clamp_interior(GridMeasure(Grid.line(0, 1, 2), [1, 0]), rho)

    @given(simplex_vec(6), st.floats(1e-4, 0.16))
    def test_properties(self, w, rho):
        g = Grid.line(0, 1, 6)
        c = clamp_interior(grid_measure(g, w), rho)
        assert c.weights.min() >= rho * (1 - 1e-12) and c.interior
        assert abs(c.weights.sum() - 1) <= 1e-12
        # order preserving
        assert np.all(np.sign(np.diff(c.weights)) == np.sign(np.diff(w)))
