import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porous_curves.engine.errors import DomainError, ParameterError, PreconditionError
from porous_curves.engine.geometry import CurveC1, IntervalSet
from porous_curves.engine.porous import CantorSpec, CylinderOracle, Membership, PorosityMode, fat_cantor_cylinder
from porous_curves.engine.power_porosity import (
    TubeIntersectionOracle,
    counterexample_experiment,
    horizontal_neighborhood_check,
    tube_cover,
    tube_family,
    tube_radius,
    witness_sweep,
)

# 1 - sum_{n<=6} 2^(n-1) 0.3^n
FAT_D6 = 0.284992
POWER_TWO = PorosityMode.power(2.0)


def horizontal():
    return CurveC1.line([0.0, 0.0], [1.0, 0.0])


class TestTubes:
    """Tube radii and area budgets."""

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(1e-8, 1.0))
    def test_radius_fits_budget(self, length, budget):
        r = tube_radius(length, budget)
        exact = budget / (length + math.sqrt(length * length + math.pi * budget))
        assert 2.0 * r * length + math.pi * r * r < budget
        assert r > 0.49 * exact

    def test_no_curves(self):
        tubes = tube_cover([], 0.1)
        assert len(tubes) == 0 and tubes.area_bound == 0.0

    def test_eps_must_be_positive(self):
        with pytest.raises(ParameterError):
            tube_cover([horizontal()], 0.0)

    def test_geometric_budgets(self):
        tubes = tube_cover(tube_family(3, seed=0), 0.01)
        assert [t.budget for t in tubes.tubes] == [0.005, 0.0025, 0.00125]
        assert all(t.area_bound < t.budget for t in tubes.tubes)
        assert tubes.area_bound < 0.01
        assert len(tubes.rows()) == 3

    def test_generator_lies_in_its_tube(self):
        tubes = tube_cover(tube_family(2, seed=0), 0.01)
        assert tubes.holds_image(tubes.tubes[0].curve, 0)
        assert not tubes.holds_image(tubes.tubes[0].curve.translated([0.0, 0.1]), 0)


class TestTubeFamily:
    def test_starts_with_horizontal_segment(self):
        family = tube_family(3, seed=5)
        assert len(family) == 3
        assert np.allclose(family[0](0.5), [0.5, 0.0])
        assert all(np.isclose(curve(0.25)[0], 0.25) for curve in family)

    def test_seeded(self):
        a, b = tube_family(2, seed=1), tube_family(2, seed=1)
        assert np.array_equal(a[1](0.3), b[1](0.3))

    def test_size_must_be_positive(self):
        with pytest.raises(DomainError):
            tube_family(0, seed=0)


class TestTubeIntersectionOracle:
    """A = B ∩ T around the horizontal segment."""

    @pytest.fixture
    def oracle(self):
        base = fat_cantor_cylinder(CantorSpec(0.3, 6), POWER_TWO)
        return TubeIntersectionOracle(base, tube_cover([horizontal()], 0.01))

    def test_membership(self, oracle):
        assert oracle.contains([0.0, 0.0], 1e-9) == Membership.INSIDE
        assert oracle.contains([0.0, 0.5], 1e-9) == Membership.OUTSIDE
        assert oracle.contains([0.5, 0.0], 1e-9) == Membership.OUTSIDE

    def test_inflation_widens_tubes(self, oracle):
        assert oracle.contains([0.0, 0.05], 1e-9) == Membership.OUTSIDE
        assert oracle.inflated(0.1).contains([0.0, 0.05], 1e-9) == Membership.INSIDE

    def test_holes_come_from_the_base(self, oracle):
        ours, theirs = oracle.find_hole([0.0, 0.0], 0.1), oracle.base.find_hole([0.0, 0.0], 0.1)
        assert np.array_equal(ours.h, theirs.h) and ours.r == theirs.r

    def test_empty_tube_set(self):
        base = fat_cantor_cylinder(CantorSpec(0.3, 4), POWER_TWO)
        oracle = TubeIntersectionOracle(base, tube_cover([], 0.01))
        assert oracle.is_empty
        assert oracle.sample_points(5, np.random.default_rng(0)).shape == (0, 2)


class TestWitnessSweep:
    def test_ternary_endpoints(self, ternary):
        points = np.array([[0.0, 0.0], [1.0 / 3.0, 0.2], [0.0, 0.7], [1.0 / 3.0, 0.9]])
        queries = witness_sweep(ternary, points, np.random.default_rng(0), 1e-2)
        assert len(queries) == 4
        assert all(q.verified for q in queries), [q.reason for q in queries if not q.verified]
        assert all(1e-2 <= q.eps <= 0.5 for q in queries)

    def test_empty_scale_range(self, ternary):
        with pytest.raises(DomainError):
            witness_sweep(ternary, np.zeros((1, 2)), np.random.default_rng(0), 0.5)


class TestCounterexample:
    """Small tubes, same preimage."""

    def test_depth_six(self):
        report = counterexample_experiment(0.3, 2.0, 6, eps=0.01, delta=0.01, seed=0, family_size=2,
                                           tol=1e-4, witness_samples=20)
        assert report.area_T < 0.01
        assert report.preimage_B.value == pytest.approx(FAT_D6, abs=1e-9)
        assert report.identity_holds, report.summary()
        assert report.image_in_tube
        assert report.witness_failures == 0
        assert report.passed

    def test_needs_positive_eps(self):
        with pytest.raises(ParameterError):
            counterexample_experiment(0.3, 2.0, 6, eps=0.0, delta=0.01, seed=0)

    def test_needs_power_condition(self):
        with pytest.raises(ParameterError):
            counterexample_experiment(0.2, 2.0, 6, eps=0.01, delta=0.01, seed=0)


class TestNeighborhoodCheck:
    def test_fat_cantor_cylinder(self):
        oracle = fat_cantor_cylinder(CantorSpec(0.3, 6), POWER_TWO)
        report = horizontal_neighborhood_check(oracle, 0.01, trials=3, seed=0)
        assert report.passed and report.certified_delta == 0.01
        assert report.trials[0].measure.value == pytest.approx(FAT_D6, abs=1e-9)
        assert report.min_measure > 0.0
        assert len(report.rows()) == 3

    def test_needs_a_product_set(self):
        base = fat_cantor_cylinder(CantorSpec(0.3, 4), POWER_TWO)
        oracle = TubeIntersectionOracle(base, tube_cover([horizontal()], 0.01))
        with pytest.raises(PreconditionError):
            horizontal_neighborhood_check(oracle, 0.01, trials=2, seed=0)

    def test_needs_positive_measure(self):
        oracle = CylinderOracle(IntervalSet.empty(), PorosityMode.c_porous(0.5))
        with pytest.raises(PreconditionError):
            horizontal_neighborhood_check(oracle, 0.01, trials=2, seed=0)

    def test_delta_must_be_positive(self):
        oracle = fat_cantor_cylinder(CantorSpec(0.3, 4), POWER_TWO)
        with pytest.raises(DomainError):
            horizontal_neighborhood_check(oracle, 0.0, trials=2, seed=0)
