import pytest

from porous_curves.engine.geometry import CurveC1, IntervalSet
from porous_curves.engine.porous import ternary_cylinder
from porous_curves.engine.vitali import select_disjoint_cover

EDGE_LAMBDA = 16.0
EDGE_THETA = 0.5


@pytest.fixture
def ternary():
    """Middle-thirds cylinder, depth 4, c = 1/2."""
    return ternary_cylinder(4)


@pytest.fixture
def edge_line():
    """Vertical segment on the closed edge x = 1/3 of the first ternary gap."""
    return CurveC1.line([1.0 / 3.0, 0.0], [0.0, 1.0])


@pytest.fixture
def edge_cover(edge_line, ternary):
    return select_disjoint_cover(edge_line, ternary, EDGE_LAMBDA, EDGE_THETA, IntervalSet.empty(), budget=0.01, seed=0)
