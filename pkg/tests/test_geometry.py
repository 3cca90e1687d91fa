import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porous_curves.engine.errors import DomainError
from porous_curves.engine.geometry import (
    KNOT_MERGE_TOL,
    CurveC1,
    Interval,
    IntervalSet,
    MeasureEstimate,
    distance_enclosure,
    eval_curve,
    gamma1_distance,
    gamma1_distance_bracket,
    merge_knots,
    sup_derivative_norm,
    sup_derivative_norm_bracket,
    sup_norm,
    sup_norm_bracket,
    sup_on,
)

REL_TOL = 1e-9
ABS_TOL = 1e-12


def horizontal() -> CurveC1:
    return CurveC1.line([0.0, 0.0], [1.0, 0.0])


def random_curve(seed: int, pieces: int = 5, dim: int = 2) -> CurveC1:
    rng = np.random.default_rng(seed)
    bp = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, pieces - 1)), [1.0]])
    return CurveC1.from_hermite(bp, rng.normal(size=(pieces + 1, dim)), rng.normal(size=(pieces + 1, dim)))


intervals = st.lists(
    st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 0.3)).map(lambda p: (p[0], min(1.0, p[0] + p[1]))),
    max_size=6,
)


class TestEvalCurve:
    """Evaluation of Hermite curves at knots and inside pieces."""

    def test_linear_curve_midpoint(self):
        pos, der = eval_curve(horizontal(), 0.5)
        assert np.allclose(pos, [0.5, 0.0]) and np.allclose(der, [1.0, 0.0]), f"got {pos}, {der}"

    def test_start_returns_stored_data(self):
        f = random_curve(3)
        pos, der = eval_curve(f, 0.0)
        assert np.array_equal(pos, f.positions[0]) and np.array_equal(der, f.derivatives[0])

    def test_hermite_line_is_reproduced(self):
        f = CurveC1.from_hermite([0.0, 1.0], [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]])
        pos, der = eval_curve(f, 0.25)
        assert np.allclose(pos, [0.25, 0.0], atol=ABS_TOL), f"position {pos}"
        assert np.allclose(der, [1.0, 0.0], atol=ABS_TOL), f"derivative {der}"

    def test_end_uses_left_derivative(self):
        f = CurveC1.polyline([0.0, 0.5, 1.0], [[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]])
        _, der = eval_curve(f, 1.0)
        assert np.allclose(der, [1.0, -1.0]), f"derivative at 1 was {der}"

    def test_parameter_outside_unit_interval(self):
        with pytest.raises(DomainError):
            eval_curve(horizontal(), 1.5)

    def test_knots_are_interpolated(self):
        f = random_curve(11)
        pos, der = f.evaluate(f.breakpoints[:-1])
        assert np.allclose(pos, f.positions[:-1], atol=1e-12)
        assert np.allclose(der, f.derivatives[:-1], atol=1e-12)


class TestCurveConstruction:
    """Validation and algebra of CurveC1."""

    def test_breakpoints_must_span_unit_interval(self):
        with pytest.raises(DomainError):
            CurveC1.from_hermite([0.0, 0.9], [[0, 0], [1, 0]], [[1, 0], [1, 0]])

    def test_points_need_two_coordinates(self):
        with pytest.raises(DomainError):
            CurveC1.line([0.0], [1.0])

    def test_polyline_records_kinks(self):
        f = CurveC1.polyline([0.0, 0.5, 1.0], [[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]])
        assert not f.is_c1
        assert f.kinks.tolist() == [0.5]

    def test_straight_polyline_is_c1(self):
        f = CurveC1.polyline([0.0, 0.5, 1.0], [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
        assert f.is_c1

    def test_sum_matches_pointwise_sum(self):
        f, g = random_curve(1), random_curve(2, pieces=3)
        ts = np.linspace(0.0, 1.0, 101)
        assert np.allclose((f + g).evaluate(ts)[0], f.evaluate(ts)[0] + g.evaluate(ts)[0], atol=1e-10)

    def test_sum_with_crowded_knots_keeps_gamma1_distance(self):
        wave = lambda t: np.column_stack([np.sin(math.pi * t), np.cos(2.0 * t)])
        wave_d = lambda t: np.column_stack([math.pi * np.cos(math.pi * t), -2.0 * np.sin(2.0 * t)])
        g = CurveC1.sample_hermite(wave, wave_d, 16)
        bp = np.linspace(0.0, 1.0, 17)
        bp[1:-1] += 7e-12
        bump = CurveC1(bp, wave(bp), wave_d(bp))
        scale = 1e-6
        total = g + bump.scaled(scale)
        assert np.min(np.diff(total.breakpoints)) >= KNOT_MERGE_TOL
        size = sup_norm_bracket(bump).upper + sup_derivative_norm_bracket(bump).upper
        assert gamma1_distance_bracket(total, g).upper < 1.01 * scale * size

    def test_sum_keeps_kinks_of_either_curve(self):
        kinked = CurveC1.polyline([0.0, 0.5, 1.0], [[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]])
        smooth = CurveC1.from_hermite([0.0, 0.5 + 1e-12, 1.0], np.zeros((3, 2)), np.zeros((3, 2)))
        total = kinked + smooth
        assert total.kinks.tolist() == [0.5]

    def test_translated_keeps_derivatives(self):
        f = random_curve(4)
        g = f.translated([1.0, -2.0])
        assert np.array_equal(g.derivatives, f.derivatives)
        assert np.allclose(g.positions - f.positions, [1.0, -2.0])

    def test_record_round_trip_is_exact(self):
        f = random_curve(5)
        g = CurveC1.from_record(f.to_record())
        assert np.array_equal(g.positions, f.positions) and np.array_equal(g.breakpoints, f.breakpoints)

    def test_length_bound_of_segment(self):
        assert CurveC1.line([0.0, 0.0], [3.0, 4.0]).length_bound() == pytest.approx(5.0, rel=REL_TOL)

    def test_sample_hermite_matches_function_at_knots(self):
        f = CurveC1.sample_hermite(
            lambda t: np.column_stack([t, np.sin(t)]),
            lambda t: np.column_stack([np.ones_like(t), np.cos(t)]),
            8,
        )
        assert f.pieces == 8
        assert f(0.5)[1] == pytest.approx(math.sin(0.5), abs=1e-6)


class TestNorms:
    """Certified sup norms and the Gamma_1 distance."""

    @pytest.mark.parametrize("velocity, expected", [([1.0, 0.0], 1.0), ([2.0, 0.0], 2.0)])
    def test_derivative_norm_of_lines(self, velocity, expected):
        got = sup_derivative_norm(CurveC1.line([0.0, 0.0], velocity))
        assert got == pytest.approx(expected, rel=REL_TOL), f"sup||f'|| = {got}, expected {expected}"

    def test_hermite_line_derivative_norm(self):
        f = CurveC1.from_hermite([0.0, 1.0], [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]])
        assert sup_derivative_norm(f) == pytest.approx(1.0, rel=REL_TOL)

    def test_identical_curves_are_at_distance_zero(self):
        f = random_curve(7)
        assert gamma1_distance(f, f) == 0.0

    def test_constant_offset(self):
        g = CurveC1.line([0.0, 0.5], [1.0, 0.0])
        assert gamma1_distance(horizontal(), g) == pytest.approx(0.5, rel=REL_TOL)

    def test_linear_offset(self):
        g = CurveC1.line([0.0, 0.0], [1.0, 0.1])
        got = gamma1_distance(horizontal(), g)
        assert got == pytest.approx(0.2, rel=REL_TOL), f"Gamma_1 distance {got}, expected 0.2"

    def test_bracket_encloses_sampled_value(self):
        f, g = random_curve(8), random_curve(9)
        ts = np.linspace(0.0, 1.0, 2001)
        diff = f.evaluate(ts)[0] - g.evaluate(ts)[0]
        ddiff = f.evaluate(ts)[1] - g.evaluate(ts)[1]
        sampled = np.max(np.linalg.norm(diff, axis=1)) + np.max(np.linalg.norm(ddiff, axis=1))
        bracket = gamma1_distance_bracket(f, g)
        assert bracket.upper >= sampled * (1.0 - 1e-9), f"upper {bracket.upper} below sampled {sampled}"

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    def test_sup_norm_scales(self, seed, factor):
        f = random_curve(seed)
        assert sup_norm(f.scaled(factor)) == pytest.approx(factor * sup_norm(f), rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
    def test_triangle_inequality(self, a, b, c):
        f, g, h = random_curve(a), random_curve(b), random_curve(c)
        assert gamma1_distance(f, h) <= gamma1_distance(f, g) + gamma1_distance(g, h) + 1e-9

    def test_sup_on_window(self):
        f = CurveC1.line([0.0, 0.0], [1.0, 0.0])
        assert sup_on(f, 0.0, 0.25).upper == pytest.approx(0.25, rel=REL_TOL)
        assert sup_on(f, 0.0, 0.25, derivative=True).lower == pytest.approx(1.0, rel=REL_TOL)

    def test_zero_curve_bracket(self):
        zero = CurveC1.line([0.0, 0.0], [0.0, 0.0])
        bracket = sup_norm_bracket(zero)
        assert bracket.lower == bracket.upper == 0.0


class TestIntervalArithmetic:
    """Outward rounding of the interval type used for witness re-checks."""

    def test_sum_encloses_exact_value(self):
        total = Interval.point(0.1) + 0.2
        assert total.lo <= 0.30000000000000004 <= total.hi and total.lo < total.hi

    def test_distance_enclosure(self):
        d = distance_enclosure([0.0, 0.0], [3.0, 4.0])
        assert d.lo <= 5.0 <= d.hi

    def test_square_straddling_zero(self):
        assert Interval(-2.0, 1.0).square().lo == 0.0


class TestIntervalSet:
    """Normalisation and set algebra on finite unions of closed intervals."""

    def test_touching_union_merges(self):
        got = IntervalSet([0.0], [0.3]) | IntervalSet([0.3], [0.5])
        assert got.to_rows() == [(0.0, 0.5)]

    def test_difference(self):
        got = IntervalSet.unit() - IntervalSet([0.35], [0.65])
        assert got.to_rows() == [(0.0, 0.35), (0.65, 1.0)]
        assert got.total_length() == pytest.approx(0.7, abs=ABS_TOL)

    def test_intersection(self):
        got = IntervalSet([0.0], [0.5]) & IntervalSet([0.4], [1.0])
        assert got.to_rows() == [(0.4, 0.5)]

    def test_complement_of_empty(self):
        assert IntervalSet.empty().complement().to_rows() == [(0.0, 1.0)]

    def test_degenerate_intervals_dropped(self):
        assert IntervalSet([0.2, 0.4], [0.2, 0.5]).to_rows() == [(0.4, 0.5)]

    def test_invalid_interval(self):
        with pytest.raises(DomainError):
            IntervalSet([0.5], [0.4])

    def test_closed_membership(self):
        s = IntervalSet([0.0, 0.65], [0.35, 1.0])
        assert s.contains(0.35) and not s.contains(0.5)
        assert s.mask(np.array([0.35, 0.5, 0.65])).tolist() == [True, False, True]

    def test_distance_to(self):
        s = IntervalSet([0.0, 0.65], [0.35, 1.0])
        assert s.distance_to(0.4) == pytest.approx(0.05)
        assert IntervalSet.empty().distance_to(0.4) == math.inf

    def test_depth(self):
        s = IntervalSet([0.1, 0.5], [0.3, 0.9])
        assert s.depth(0.2) == pytest.approx(0.1)
        assert s.depth(0.85) == pytest.approx(0.05)
        assert s.depth(0.4) == 0.0
        assert IntervalSet.empty().depth(0.4) == 0.0

    @settings(max_examples=80, deadline=None)
    @given(intervals, intervals)
    def test_inclusion_exclusion(self, a, b):
        A, B = IntervalSet.from_intervals(a), IntervalSet.from_intervals(b)
        lhs = (A | B).total_length() + (A & B).total_length()
        rhs = A.total_length() + B.total_length()
        assert lhs == pytest.approx(rhs, abs=1e-12), f"|A∪B| + |A∩B| = {lhs}, |A| + |B| = {rhs}"

    @settings(max_examples=80, deadline=None)
    @given(intervals)
    def test_set_and_complement_partition_unit(self, a):
        A = IntervalSet.from_intervals(a)
        total = A.clip(0.0, 1.0).total_length() + A.complement().total_length()
        assert total == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(intervals, intervals)
    def test_difference_is_disjoint_from_subtrahend(self, a, b):
        A, B = IntervalSet.from_intervals(a), IntervalSet.from_intervals(b)
        assert ((A - B) & B).total_length() == pytest.approx(0.0, abs=1e-12)


class TestMeasureEstimate:
    """Two-sided measure values."""

    def test_bounds(self):
        m = MeasureEstimate(0.5, 0.1)
        assert (m.lower, m.upper) == (0.4, 0.6)

    def test_agreement(self):
        assert MeasureEstimate(0.5, 0.02).agrees_with(MeasureEstimate(0.51, 0.0))
        assert not MeasureEstimate(0.5, 0.001).agrees_with(MeasureEstimate(0.51, 0.0))

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            MeasureEstimate(-0.1)


class TestMergeKnots:
    """Collapsing knots that crowd their neighbours."""

    def test_crowded_knot_dropped(self):
        assert merge_knots([0.0, 0.5, 0.5 + 1e-12, 1.0]).tolist() == [0.0, 0.5, 1.0]

    def test_kept_knot_replaces_neighbour(self):
        merged = merge_knots([0.0, 0.5, 0.5 + 1e-12, 1.0], keep=[0.5 + 1e-12])
        assert merged.tolist() == [0.0, 0.5 + 1e-12, 1.0]

    def test_two_kept_knots_both_survive(self):
        knots = [0.0, 0.5, 0.5 + 1e-12, 1.0]
        assert merge_knots(knots, keep=knots[1:3]).tolist() == knots

    def test_ends_survive(self):
        assert merge_knots([0.0, 1e-12, 1.0 - 1e-12, 1.0]).tolist() == [0.0, 1.0]

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(1e-6, 1.0 - 1e-6), max_size=40), st.floats(1e-12, 1e-3))
    def test_spacing_and_subset(self, inner, tol):
        knots = np.array([0.0, *inner, 1.0])
        merged = merge_knots(knots, tol)
        assert merged[0] == 0.0 and merged[-1] == 1.0
        assert np.all(np.diff(merged) >= tol)
        assert set(merged.tolist()) <= set(knots.tolist())
