"""
Power-p porosity experiments on the fat Cantor cylinder B = C x R.

Thin tubes around a finite family of curves give a set T of tiny area. A = B ∩ T is
then power-p porous (holes are inherited from B) and of tiny area, yet every curve of
the family meets it in the same measure as it meets B.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DepthError, DomainError, ParameterError, PreconditionError, ResolutionError
from .geometry import (CurveC1, MeasureEstimate, Point, as_point, gamma1_components,
                       sup_derivative_norm_bracket, sup_norm_bracket)
from .porous import (CantorSpec, Membership, PorosityMode, PorousSetOracle, fat_cantor_cylinder,
                     verify_witness)
from .preimage import preimage_measure

logger = logging.getLogger(__name__)

TUBE_SAMPLES = 257
REFINE_SAMPLES = 129
FAMILY_PIECES = 32
RADIUS_BACKOFF = 1e-9
WITNESS_SAMPLES = 200
DELTA_RETRIES = 10


@dataclass(frozen=True)
class Tube:
    curve: CurveC1
    radius: float
    length_bound: float
    budget: float

    @property
    def area_bound(self) -> float:
        """Rectangle plus end caps: 2 r L + pi r^2."""
        return 2.0 * self.radius * self.length_bound + math.pi * self.radius ** 2


@dataclass
class TubeSet:
    tubes: List[Tube]
    eps: float

    @property
    def area_bound(self) -> float:
        return math.fsum(t.area_bound for t in self.tubes)

    def __len__(self) -> int:
        return len(self.tubes)

    def holds_image(self, curve: CurveC1, index: int) -> bool:
        """Whether curve([0, 1]) lies in tube `index`, certified by sup||curve - generator|| < r."""
        tube = self.tubes[index]
        value, _ = gamma1_components(curve, tube.curve)
        return value.upper < tube.radius

    def rows(self) -> List[Tuple[int, float, float, float]]:
        return [(j, t.radius, t.length_bound, t.area_bound) for j, t in enumerate(self.tubes)]


def tube_radius(length: float, budget: float) -> float:
    """Largest r with 2 r L + pi r^2 <= budget, backed off so the inequality is strict."""
    r = budget / (length + math.sqrt(length * length + math.pi * budget))
    r *= 1.0 - RADIUS_BACKOFF
    while 2.0 * r * length + math.pi * r * r >= budget:
        r /= 2.0
    return r


def tube_cover(curves: Sequence[CurveC1], eps: float) -> TubeSet:
    """Tube n (1-based) gets an area budget of eps / 2^n."""
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    tubes = []
    for n, curve in enumerate(curves, start=1):
        length = curve.length_bound()
        if not math.isfinite(length):
            raise DomainError(f"Curve {n} has no finite certified length")
        budget = eps / 2.0 ** n
        tubes.append(Tube(curve, tube_radius(length, budget), length, budget))
    return TubeSet(tubes, eps)


def tube_family(size: int, seed: int, dim: int = 2) -> List[CurveC1]:
    """The horizontal segment (t, 0) followed by seeded curves (t, a + b sin(pi k t))."""
    if size < 1:
        raise DomainError(f"Family size must be at least 1, got {size}")
    rng = np.random.default_rng(seed)
    start = np.zeros(dim)
    velocity = np.zeros(dim)
    velocity[0] = 1.0
    family = [CurveC1.line(start, velocity)]
    for k in range(1, size):
        a, b = rng.uniform(-0.5, 0.5), rng.uniform(-0.25, 0.25)

        def position(t, a=a, b=b, k=k):
            out = np.zeros((t.size, dim))
            out[:, 0] = t
            out[:, 1] = a + b * np.sin(math.pi * k * t)
            return out

        def slope(t, b=b, k=k):
            out = np.zeros((t.size, dim))
            out[:, 0] = 1.0
            out[:, 1] = b * math.pi * k * np.cos(math.pi * k * t)
            return out

        family.append(CurveC1.sample_hermite(position, slope, FAMILY_PIECES))
    return family


class TubeIntersectionOracle(PorousSetOracle):
    """A = B ∩ T for a base oracle B and a tube set T. Holes are those of B."""

    kind = "tube-intersection"

    def __init__(self, base: PorousSetOracle, tubes: TubeSet):
        super().__init__(base.mode, base.ambient_dim)
        self.base = base
        self.tubes = tubes
        self._grid = np.linspace(0.0, 1.0, TUBE_SAMPLES)
        self._samples = []
        for tube in tubes.tubes:
            pos, _ = tube.curve.evaluate(self._grid)
            lip = sup_derivative_norm_bracket(tube.curve).upper
            self._samples.append((pos, lip * (self._grid[1] - self._grid[0]) / 2.0))

    @property
    def is_empty(self) -> bool:
        return self.base.is_empty or not self.tubes.tubes

    @property
    def resolution_floor(self) -> float:
        return self.base.resolution_floor

    def _tube_distances(self, pt: Sequence[float]) -> List[Tuple[float, float]]:
        """(lower, upper) bounds on the distance from pt to each generator curve."""
        point = as_point(pt, dim=self.ambient_dim)
        step = self._grid[1] - self._grid[0]
        out = []
        for tube, (pos, slack) in zip(self.tubes.tubes, self._samples):
            dists = np.linalg.norm(pos - point, axis=1)
            i = int(np.argmin(dists))
            lower = max(0.0, float(dists[i]) - slack)
            # refine around the nearest sample; only the upper bound needs it
            local = np.linspace(max(0.0, self._grid[i] - step), min(1.0, self._grid[i] + step), REFINE_SAMPLES)
            fine, _ = tube.curve.evaluate(local)
            upper = min(float(dists[i]), float(np.min(np.linalg.norm(fine - point, axis=1))))
            out.append((lower, upper))
        return out

    def _tube_ball(self, center: Sequence[float], radius: float) -> Membership:
        inside = False
        for (lo, hi), tube in zip(self._tube_distances(center), self.tubes.tubes):
            if hi + radius < tube.radius:
                return Membership.INSIDE
            if lo - radius < tube.radius:
                inside = True
        return Membership.UNKNOWN if inside else Membership.OUTSIDE

    def contains(self, pt: Sequence[float], resolution: float) -> Membership:
        first = self.base.contains(pt, resolution)
        if first == Membership.OUTSIDE:
            return first
        second = self._tube_ball(pt, 0.0)
        if second == Membership.OUTSIDE:
            return second
        return Membership.INSIDE if first == second == Membership.INSIDE else Membership.UNKNOWN

    def classify_ball(self, center: Sequence[float], radius: float) -> Membership:
        first = self.base.classify_ball(center, radius)
        if first == Membership.OUTSIDE:
            return first
        second = self._tube_ball(center, radius)
        if second == Membership.OUTSIDE:
            return second
        return Membership.INSIDE if first == second == Membership.INSIDE else Membership.UNKNOWN

    def hole_candidates(self, x: Point, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.base.hole_candidates(x, eps)

    def ball_is_clear(self, h: Sequence[float], r: float) -> bool:
        return self.base.ball_is_clear(h, r)

    def find_hole(self, x: Sequence[float], eps: float):
        return self.base.find_hole(x, eps)

    def inflated(self, delta: float) -> "TubeIntersectionOracle":
        grown = TubeSet([Tube(t.curve, t.radius + delta, t.length_bound, t.budget) for t in self.tubes.tubes],
                        self.tubes.eps)
        return TubeIntersectionOracle(self.base.inflated(delta), grown)

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points of generator curves that lie in B."""
        if self.is_empty or count <= 0:
            return np.empty((0, self.ambient_dim))
        points = []
        for _ in range(50 * count):
            tube = self.tubes.tubes[int(rng.integers(len(self.tubes)))]
            pt = tube.curve(float(rng.random()))
            if self.base.contains(pt, 1e-12) == Membership.INSIDE:
                points.append(pt)
                if len(points) == count:
                    break
        return np.array(points).reshape(-1, self.ambient_dim)


@dataclass
class CounterexampleReport:
    mu: float
    p: float
    depth: int
    eps: float
    area_T: float
    preimage_B: MeasureEstimate
    preimage_A: MeasureEstimate
    limit_estimate: MeasureEstimate
    perturbed_B: MeasureEstimate
    perturbed_A: MeasureEstimate
    witnesses_checked: int
    witness_failures: int
    tubes: TubeSet
    image_in_tube: bool = True
    witnesses: List["WitnessQuery"] = field(default_factory=list)

    @property
    def identity_holds(self) -> bool:
        return self.preimage_A.agrees_with(self.preimage_B) and self.perturbed_A.agrees_with(self.perturbed_B)

    @property
    def passed(self) -> bool:
        return (self.area_T < self.eps and self.identity_holds and self.witness_failures == 0
                and self.perturbed_A.lower > 0.0 and self.image_in_tube)

    def summary(self) -> Dict[str, object]:
        return {
            "mu": self.mu, "p": self.p, "depth": self.depth, "eps": self.eps,
            "area_T": self.area_T,
            "preimage_B": self.preimage_B.value, "preimage_B_error": self.preimage_B.error_bound,
            "preimage_A": self.preimage_A.value, "preimage_A_error": self.preimage_A.error_bound,
            "limit_estimate": self.limit_estimate.value, "limit_error": self.limit_estimate.error_bound,
            "perturbed_B": self.perturbed_B.value, "perturbed_A": self.perturbed_A.value,
            "witnesses_checked": self.witnesses_checked, "witness_failures": self.witness_failures,
            "identity_holds": self.identity_holds, "passed": self.passed,
        }


@dataclass(frozen=True)
class WitnessQuery:
    index: int
    x: float
    eps: float
    r: float
    d: float
    verified: bool
    reason: str = ""

    def row(self) -> Tuple[int, float, float, float, float, bool]:
        return (self.index, self.x, self.eps, self.r, self.d, self.verified)


WITNESS_COLUMNS = ("query", "x", "eps", "r", "d", "verified")


def witness_sweep(oracle: PorousSetOracle, points: np.ndarray, rng: np.random.Generator,
                  eps_floor: float, eps_ceiling: float = 0.5) -> List[WitnessQuery]:
    """
    One hole query per point at a log-uniform scale in [eps_floor, eps_ceiling], each witness
    re-verified independently. A query the oracle cannot answer counts as a failure.
    """
    lo = max(eps_floor, oracle.resolution_floor)
    if not lo < eps_ceiling:
        raise DomainError(f"Empty scale range [{lo:.3g}, {eps_ceiling:.3g}]")
    out = []
    for i, pt in enumerate(points):
        eps = float(lo * (eps_ceiling / lo) ** rng.random())
        try:
            witness = oracle.find_hole(pt, eps)
        except (ResolutionError, DepthError) as e:
            out.append(WitnessQuery(i, float(pt[0]), eps, 0.0, 0.0, False, str(e)))
            continue
        ok = verify_witness(oracle, pt, eps, witness)
        out.append(WitnessQuery(i, float(pt[0]), eps, witness.r, witness.d, ok, "" if ok else "re-check failed"))
    failed = sum(1 for q in out if not q.verified)
    if failed:
        logger.warning(f"{failed} of {len(out)} witness queries failed on {oracle.kind}")
    return out


def counterexample_experiment(mu: float, p: float, D: int, eps: float, delta: float, seed: int,
                              family_size: int = 4, tol: float = 1e-6,
                              witness_samples: int = WITNESS_SAMPLES) -> CounterexampleReport:
    """
    B = C_D x R, T = tubes around a seeded family starting with (t, 0), A = B ∩ T.

    |gamma_1^-1(A)| is computed by bisection against the A oracle and compared with the exact
    |gamma_1^-1(B)|; the same is done for a perturbed curve rho(t) = (t, eta sin(pi t)) that
    stays inside gamma_1's tube and within delta of gamma_1.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    spec = CantorSpec(mu, D)
    if 2.0 ** p * mu <= 1.0:
        raise ParameterError(f"Need 2^p * mu > 1, got 2^{p} * {mu} = {2.0 ** p * mu:.6g}")
    B = fat_cantor_cylinder(spec, PorosityMode.power(p))
    tubes = tube_cover(tube_family(family_size, seed), eps)
    A = TubeIntersectionOracle(B, tubes)
    gamma = tubes.tubes[0].curve

    preimage_B = preimage_measure(gamma, B, tol).measure
    preimage_A = preimage_measure(gamma, A, tol).measure
    partial = B.first_coordinate_set.total_length()
    limit = MeasureEstimate(partial - spec.tail / 2.0, spec.tail / 2.0)

    r1 = tubes.tubes[0].radius
    eta = min(0.25 * r1, 0.5 * delta / (1.0 + math.pi))
    rho = CurveC1.sample_hermite(
        lambda t: np.column_stack([t, eta * np.sin(math.pi * t)]),
        lambda t: np.column_stack([np.ones_like(t), eta * math.pi * np.cos(math.pi * t)]),
        FAMILY_PIECES,
    )
    image_in_tube = tubes.holds_image(gamma, 0) and tubes.holds_image(rho, 0)
    perturbed_B = preimage_measure(rho, B, tol).measure
    perturbed_A = preimage_measure(rho, A, tol).measure

    rng = np.random.default_rng(seed)
    points = A.sample_points(witness_samples, rng)
    queries = witness_sweep(B, points, rng, 2.0 ** -(D - 1))
    failures = sum(1 for q in queries if not q.verified)

    report = CounterexampleReport(mu, p, D, eps, tubes.area_bound, preimage_B, preimage_A, limit,
                                  perturbed_B, perturbed_A, len(queries), failures, tubes, image_in_tube, queries)
    logger.info(f"Counterexample mu={mu}, p={p}, D={D}: area(T) <= {report.area_T:.4g}, "
                f"|gamma^-1(A)| = {preimage_A.value:.6g} ± {preimage_A.error_bound:.2g}")
    if not report.passed:
        logger.warning(f"Counterexample checks failed: {report.summary()}")
    return report


@dataclass
class NeighborhoodTrial:
    trial: int
    delta: float
    measure: MeasureEstimate
    lower_bound: float

    @property
    def passed(self) -> bool:
        return self.measure.lower > 0.0 and self.measure.upper >= self.lower_bound * (1.0 - 1e-12)


@dataclass
class NeighborhoodReport:
    delta: float
    certified_delta: Optional[float]
    trials: List[NeighborhoodTrial] = field(default_factory=list)

    @property
    def min_measure(self) -> float:
        return min((t.measure.value for t in self.trials), default=0.0)

    @property
    def passed(self) -> bool:
        return self.certified_delta is not None

    def rows(self) -> List[Tuple[int, float, float]]:
        return [(t.trial, t.delta, t.measure.value) for t in self.trials]


def _random_bump(dim: int, rng: np.random.Generator) -> CurveC1:
    modes = rng.normal(size=(3, dim))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=3)

    def position(t):
        return sum(np.outer(np.sin(math.pi * (k + 1) * t + phases[k]), modes[k]) for k in range(3))

    def slope(t):
        return sum(np.outer(math.pi * (k + 1) * np.cos(math.pi * (k + 1) * t + phases[k]), modes[k])
                   for k in range(3))

    return CurveC1.sample_hermite(position, slope, FAMILY_PIECES)


def horizontal_neighborhood_check(oracle: PorousSetOracle, delta: float, trials: int, seed: int,
                                  tol: float = 1e-9) -> NeighborhoodReport:
    """
    Seeded C1 curves within delta of (t, 0) all meet F x R in positive measure.

    Each trial also checks the change-of-variables bound |F ∩ x([0,1])| / (1 + delta') where
    delta' bounds |x' - 1|. A failing trial halves delta and restarts the batch.
    """
    base = oracle.first_coordinate_set
    if base is None:
        raise PreconditionError("The neighbourhood check needs a set of the form F x R")
    if not base.total_length() > 0.0:
        raise PreconditionError("F has measure zero at this truncation")
    if delta <= 0 or trials < 1:
        raise DomainError(f"Need delta > 0 and trials >= 1, got {delta} and {trials}")
    start = np.zeros(oracle.ambient_dim)
    velocity = np.zeros(oracle.ambient_dim)
    velocity[0] = 1.0
    gamma = CurveC1.line(start, velocity)
    current = delta
    for _ in range(DELTA_RETRIES):
        rng = np.random.default_rng(seed)
        results = []
        for trial in range(trials):
            if trial == 0:
                rho = gamma
            else:
                bump = _random_bump(oracle.ambient_dim, rng)
                size = sup_norm_bracket(bump).upper + sup_derivative_norm_bracket(bump).upper
                rho = gamma + bump.scaled(0.9 * current * float(rng.uniform(0.1, 1.0)) / size)
            _, drift = gamma1_components(rho, gamma)
            x0, x1 = float(rho.positions[0, 0]), float(rho.positions[-1, 0])
            lower = base.clip(min(x0, x1), max(x0, x1)).total_length() / (1.0 + drift.upper)
            measure = preimage_measure(rho, oracle, tol).measure
            results.append(NeighborhoodTrial(trial, current, measure, lower))
        if all(r.passed for r in results):
            return NeighborhoodReport(delta, current, results)
        logger.warning(f"A trial within delta={current:.3g} missed F x R; halving delta")
        current /= 2.0
    return NeighborhoodReport(delta, None, results)
