import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porous_curves.engine.errors import DomainError
from porous_curves.engine.geometry import CurveC1, IntervalSet
from porous_curves.engine.porous import (
    CantorSpec,
    PorosityMode,
    RasterizedOracle,
    build_fat_cantor,
    empty_oracle,
    fat_cantor_cylinder,
    ternary_cylinder,
)
from porous_curves.engine.preimage import preimage_measure, preimage_measure_on

TOL = 1e-9
HALF = PorosityMode.c_porous(0.5)
DEPTH_TWO = fat_cantor_cylinder(CantorSpec(0.3, 2), HALF)


def random_curve(seed: int, pieces: int = 4) -> CurveC1:
    rng = np.random.default_rng(seed)
    bp = np.linspace(0.0, 1.0, pieces + 1)
    return CurveC1.from_hermite(bp, rng.uniform(-0.2, 1.2, size=(pieces + 1, 2)), rng.normal(size=(pieces + 1, 2)))


class TestExactProduct:
    """Preimages of cylinders F x R through the first coordinate."""

    def test_horizontal_segment(self):
        report = preimage_measure(CurveC1.line([0.0, 0.0], [1.0, 0.0]), DEPTH_TWO, tol=1e-6)
        assert report.method == "exact-product"
        assert report.measure.value == pytest.approx(0.52, abs=TOL), f"measure {report.measure}"
        assert len(report.covered) == 4

    def test_vertical_segment_in_gap(self):
        report = preimage_measure(CurveC1.line([0.5, 0.0], [0.0, 1.0]), DEPTH_TWO, tol=1e-6)
        assert report.measure.value == 0.0
        assert report.outside.to_rows() == [(0.0, 1.0)]

    def test_vertical_segment_inside(self):
        report = preimage_measure(CurveC1.line([0.1, 0.0], [0.0, 1.0]), DEPTH_TWO, tol=1e-6)
        assert report.measure.value == pytest.approx(1.0, abs=TOL)

    def test_window(self):
        window = IntervalSet([0.0], [0.35])
        report = preimage_measure_on(CurveC1.line([0.0, 0.0], [1.0, 0.0]), DEPTH_TWO, window, tol=1e-6)
        assert report.measure.value == pytest.approx(0.26, abs=TOL)

    def test_turning_point(self):
        arch = CurveC1.from_hermite([0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]], [[4.0, 0.0], [-4.0, 0.0]])
        oracle = fat_cantor_cylinder(CantorSpec(0.3, 1), HALF)
        expected = (1.0 - math.sqrt(0.65)) + math.sqrt(0.35)
        got = preimage_measure(arch, oracle, tol=1e-6).measure
        assert got.value == pytest.approx(expected, abs=1e-9), f"measure {got.value}, expected {expected}"

    def test_rows_partition_window(self):
        report = preimage_measure(random_curve(3), DEPTH_TWO, tol=1e-6)
        total = math.fsum(hi - lo for lo, hi, _ in report.rows())
        assert total == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-0.5, 1.0), st.floats(0.1, 2.0))
    def test_lines_match_base_length(self, start, slope):
        spec = CantorSpec(0.3, 3)
        line = CurveC1.line([start, 0.0], [slope, 0.0])
        expected = build_fat_cantor(spec).clip(start, start + slope).total_length() / slope
        got = preimage_measure(line, fat_cantor_cylinder(spec, HALF), tol=1e-6).measure
        assert abs(got.value - expected) <= got.error_bound + 1e-9, f"measure {got.value}, expected {expected}"

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    def test_windows_add_up(self, seed, split):
        curve = random_curve(seed)
        oracle = ternary_cylinder(4)
        full = preimage_measure(curve, oracle, tol=1e-6).measure
        left = preimage_measure_on(curve, oracle, IntervalSet([0.0], [split]), tol=1e-6).measure
        right = preimage_measure_on(curve, oracle, IntervalSet([split], [1.0]), tol=1e-6).measure
        slack = full.error_bound + left.error_bound + right.error_bound + 1e-9
        assert abs(left.value + right.value - full.value) <= slack


def half_plane() -> RasterizedOracle:
    """The strip [-0.5, 0.5] x [0, 1] on a grid of quarter cells."""
    occupied = np.zeros((6, 4), dtype=bool)
    occupied[:4, :] = True
    return RasterizedOracle(occupied, (-0.5, 1.0, 0.0, 1.0), HALF)


class TestBisection:
    """Lipschitz bisection for sets without product structure."""

    def test_half_plane_raster(self):
        oracle = half_plane()
        report = preimage_measure(CurveC1.line([0.0, 0.5], [1.0, 0.0]), oracle, tol=1e-6)
        assert report.method == "bisection" and report.converged
        assert report.measure.error_bound <= 1e-6
        assert report.measure.value == pytest.approx(0.5, abs=1e-6)

    def test_depth_cap_reports_non_convergence(self):
        oracle = half_plane()
        report = preimage_measure(CurveC1.line([0.0, 0.5], [1.0, 0.0]), oracle, tol=1e-12, max_depth=3)
        assert not report.converged
        assert report.measure.lower <= 0.5 <= report.measure.upper


class TestArguments:
    """Degenerate inputs."""

    def test_empty_set(self):
        report = preimage_measure(random_curve(1), empty_oracle(), tol=1e-6)
        assert report.measure.value == 0.0 and report.measure.error_bound == 0.0

    def test_tolerance_must_be_positive(self):
        with pytest.raises(DomainError):
            preimage_measure(random_curve(1), DEPTH_TWO, tol=0.0)

    def test_dimension_mismatch(self):
        curve = CurveC1.line([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
        with pytest.raises(DomainError):
            preimage_measure(curve, DEPTH_TWO, tol=1e-6)
