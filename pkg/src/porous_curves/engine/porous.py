"""
Porous sets with certified hole oracles.

A `PorousSetOracle` answers membership questions at a resolution and produces hole
witnesses (h, r, d): an open ball B(h, r) missing the set at distance d from a query
point. Cantor cylinders F x R^(d-1) are handled exactly through the interval structure
of the depth-D truncation of F; rasterized planar sets and finite unions are also
provided.
"""

import enum
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CantorConstructionError, DepthError, DomainError, ParameterError, PreconditionError, ResolutionError
from .geometry import ENDPOINT_SLACK, Interval, IntervalSet, Point, as_point, distance_enclosure

logger = logging.getLogger(__name__)

# holes are shrunk by this relative amount so disjointness survives outward rounding
HOLE_SHRINK = 1e-7
EDGE_BACKOFF = 1e-9
# below this scale the shrink margin approaches float spacing on [0, 1]
CYLINDER_RESOLUTION_FLOOR = 1e-8


# picks one of the admissible holes: (radii, distances) -> index
HolePolicy = Callable[[np.ndarray, np.ndarray], int]


def largest_hole(radii: np.ndarray, dists: np.ndarray) -> int:
    """Largest radius, nearest on ties."""
    return int(np.lexsort((dists, -radii))[0])


def nearest_hole(radii: np.ndarray, dists: np.ndarray) -> int:
    return int(np.lexsort((-radii, dists))[0])


class Membership(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    UNKNOWN = "unknown-at-resolution"


@dataclass(frozen=True)
class PorosityMode:
    """Which hole inequality an oracle guarantees: r > c*d, or r > d**p."""

    kind: str
    value: float

    C_POROUS = "c-porous"
    POWER_P = "power-p"

    def __post_init__(self):
        if self.kind == self.C_POROUS and not 0.0 < self.value < 1.0:
            raise ParameterError(f"Porosity constant must lie in (0, 1), got {self.value}")
        if self.kind == self.POWER_P and not self.value > 1.0:
            raise ParameterError(f"Porosity exponent must exceed 1, got {self.value}")
        if self.kind not in (self.C_POROUS, self.POWER_P):
            raise ParameterError(f"Unknown porosity mode: {self.kind}")

    @classmethod
    def c_porous(cls, c: float) -> "PorosityMode":
        return cls(cls.C_POROUS, float(c))

    @classmethod
    def power(cls, p: float) -> "PorosityMode":
        return cls(cls.POWER_P, float(p))

    def threshold(self, d: float) -> float:
        return self.value * d if self.kind == self.C_POROUS else d ** self.value

    def satisfied(self, r: float, d: float) -> bool:
        return r > self.threshold(d)


@dataclass(frozen=True)
class HoleWitness:
    h: Point
    r: float
    d: float

    def __post_init__(self):
        if not (self.r > 0 and self.d > 0):
            raise DomainError(f"Hole witness needs r > 0 and d > 0, got r={self.r}, d={self.d}")

    @property
    def ratio(self) -> float:
        return self.r / self.d


@dataclass(frozen=True)
class CantorSpec:
    """Fat Cantor parameters: removal ratio mu in (0, 1/3) and truncation depth."""

    mu: float
    depth: int

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0 / 3.0:
            raise ParameterError(f"Removal ratio mu must lie in (0, 1/3), got {self.mu}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise ParameterError(f"Depth must be a positive integer, got {self.depth}")

    @property
    def tail(self) -> float:
        return cantor_tail(self.mu, self.depth)

    @property
    def limit_length(self) -> float:
        return (1.0 - 3.0 * self.mu) / (1.0 - 2.0 * self.mu)


def child_lengths(ratio: float, depth: int) -> List[float]:
    """Lengths of the surviving intervals at levels 0..depth."""
    lengths = [1.0]
    for n in range(1, depth + 1):
        removed = ratio ** n
        child = (lengths[-1] - removed) / 2.0
        if child <= 0.0:
            raise CantorConstructionError(
                n, f"removed length {removed:.6g} does not fit in a piece of length {lengths[-1]:.6g}"
            )
        lengths.append(child)
    return lengths


def cantor_partial_length(ratio: float, depth: int) -> float:
    """1 - sum_{k<=depth} 2^(k-1) ratio^k."""
    return 1.0 - math.fsum(2.0 ** (k - 1) * ratio ** k for k in range(1, depth + 1))


def cantor_tail(ratio: float, depth: int) -> float:
    """Measure removed after the given depth: sum_{k>depth} 2^(k-1) ratio^k."""
    if 2.0 * ratio >= 1.0:
        raise ParameterError(f"Tail diverges for ratio {ratio}")
    return 2.0 ** depth * ratio ** (depth + 1) / (1.0 - 2.0 * ratio)


def build_cantor_levels(ratio: float, depth: int) -> IntervalSet:
    """Depth-D truncation of the Cantor construction removing middle pieces of length ratio^n."""
    lengths = child_lengths(ratio, depth)
    lo, hi = np.array([0.0]), np.array([1.0])
    for n in range(1, depth + 1):
        child = lengths[n]
        new_lo, new_hi = np.empty(2 * lo.size), np.empty(2 * lo.size)
        new_lo[0::2], new_hi[0::2] = lo, lo + child
        new_lo[1::2], new_hi[1::2] = hi - child, hi
        lo, hi = new_lo, new_hi
    logger.debug(f"Built Cantor truncation ratio={ratio} depth={depth} with {lo.size} intervals")
    return IntervalSet(lo, hi)


def build_fat_cantor(spec: CantorSpec) -> IntervalSet:
    return build_cantor_levels(spec.mu, spec.depth)


def _descend(ratio: float, lengths: Sequence[float], x: float, levels: int) -> Optional[Tuple[float, float]]:
    """The level-`levels` interval containing x, replaying the construction arithmetic."""
    lo, hi = 0.0, 1.0
    if not (lo - ENDPOINT_SLACK <= x <= hi + ENDPOINT_SLACK):
        return None
    for n in range(1, levels + 1):
        child = lengths[n]
        if x <= lo + child + ENDPOINT_SLACK:
            hi = lo + child
        elif x >= hi - child - ENDPOINT_SLACK:
            lo = hi - child
        else:
            return None
    return lo, hi


class PorousSetOracle(ABC):
    """Membership and hole queries against a closed set in R^d."""

    kind: str = "abstract"

    def __init__(self, mode: PorosityMode, ambient_dim: int = 2):
        if ambient_dim < 2:
            raise DomainError(f"Ambient dimension must be at least 2, got {ambient_dim}")
        self.mode = mode
        self.ambient_dim = ambient_dim
        self.hole_policy: HolePolicy = largest_hole

    @property
    @abstractmethod
    def is_empty(self) -> bool:
        ...

    @property
    @abstractmethod
    def resolution_floor(self) -> float:
        ...

    @property
    def first_coordinate_set(self) -> Optional[IntervalSet]:
        """For sets of the form F x R^(d-1), the set F; None otherwise."""
        return None

    @abstractmethod
    def contains(self, pt: Sequence[float], resolution: float) -> Membership:
        ...

    @abstractmethod
    def classify_ball(self, center: Sequence[float], radius: float) -> Membership:
        """INSIDE if the closed ball lies in the set, OUTSIDE if it misses it, else UNKNOWN."""

    @abstractmethod
    def hole_candidates(self, x: Point, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arrays (centres, radii, distances) of certified holes within eps of x."""

    @abstractmethod
    def ball_is_clear(self, h: Sequence[float], r: float) -> bool:
        """Whether the open ball B(h, r) misses the set, with outward rounding."""

    @abstractmethod
    def inflated(self, delta: float) -> "PorousSetOracle":
        """Oracle for the closed delta-neighbourhood of the set."""

    @abstractmethod
    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        ...

    def find_hole(self, x: Sequence[float], eps: float) -> HoleWitness:
        """Witness satisfying this oracle's porosity inequality, with d < eps."""
        return self.find_hole_c(x, eps)

    def find_hole_c(self, x: Sequence[float], eps: float, c: Optional[float] = None) -> HoleWitness:
        point = as_point(x, dim=self.ambient_dim)
        if eps <= 0:
            raise DomainError(f"eps must be positive, got {eps}")
        if eps < self.resolution_floor:
            raise ResolutionError(ResolutionError.BELOW_FLOOR,
                                  f"eps={eps:.3g} is below the resolution floor {self.resolution_floor:.3g}")
        if self.contains(point, ENDPOINT_SLACK) == Membership.OUTSIDE:
            raise PreconditionError(f"Point {point.tolist()} is not in the set")
        centres, radii, dists = self.hole_candidates(point, eps)
        if radii.size == 0:
            raise ResolutionError(ResolutionError.DEPTH_EXHAUSTED,
                                  f"No hole of the truncated set lies within {eps:.3g} of {point.tolist()}")
        constant = self.mode.value if c is None and self.mode.kind == PorosityMode.C_POROUS else c
        feasible = np.ones(radii.size, dtype=bool) if constant is None else radii > constant * dists
        if not np.any(feasible):
            raise ResolutionError(ResolutionError.NOT_POROUS,
                                  f"No hole with r > {constant}*d within {eps:.3g} of {point.tolist()}")
        idx = np.flatnonzero(feasible)
        best = idx[self.hole_policy(radii[idx], dists[idx])]
        return HoleWitness(h=centres[best].copy(), r=float(radii[best]), d=float(dists[best]))

    def best_ratio(self, x: Sequence[float], eps: float) -> Optional[float]:
        """Largest r/d among holes within eps, or None when the truncation has none."""
        point = as_point(x, dim=self.ambient_dim)
        _, radii, dists = self.hole_candidates(point, eps)
        if radii.size == 0:
            return None
        return float(np.max(radii / dists))


class CylinderOracle(PorousSetOracle):
    """The set F x R^(d-1) for a closed interval set F in [0, 1]."""

    def __init__(self, base: IntervalSet, mode: PorosityMode, kind: str = "cylinder",
                 ratio: Optional[float] = None, depth: Optional[int] = None, ambient_dim: int = 2):
        super().__init__(mode, ambient_dim)
        self.base = base
        self.kind = kind
        self.ratio = ratio
        self.depth = depth
        self._lengths = child_lengths(ratio, depth) if ratio is not None and depth else None

    @property
    def is_empty(self) -> bool:
        return self.base.is_empty

    @property
    def first_coordinate_set(self) -> IntervalSet:
        return self.base

    @property
    def resolution_floor(self) -> float:
        return CYLINDER_RESOLUTION_FLOOR

    def contains(self, pt: Sequence[float], resolution: float) -> Membership:
        if resolution <= 0:
            raise DomainError(f"Resolution must be positive, got {resolution}")
        x1 = float(pt[0])
        if self.base.contains(x1, slack=ENDPOINT_SLACK):
            return Membership.INSIDE
        if self.base.distance_to(x1) <= resolution:
            return Membership.UNKNOWN
        return Membership.OUTSIDE

    def classify_ball(self, center: Sequence[float], radius: float) -> Membership:
        x1 = float(center[0])
        i = int(np.searchsorted(self.base.lo, x1 + radius, side="right")) - 1
        if i < 0 or self.base.hi[i] < x1 - radius:
            return Membership.OUTSIDE
        if self.base.lo[i] <= x1 - radius and self.base.hi[i] >= x1 + radius:
            return Membership.INSIDE
        return Membership.UNKNOWN

    def _gaps_near(self, x1: float, eps: float) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.base.lo, self.base.hi
        gap_lo = np.concatenate([[-math.inf], hi])
        gap_hi = np.concatenate([lo, [math.inf]])
        first = int(np.searchsorted(gap_hi, x1 - eps, side="left"))
        last = int(np.searchsorted(gap_lo, x1 + eps, side="right"))
        return gap_lo[first:last], gap_hi[first:last]

    def hole_candidates(self, x: Point, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x1 = float(x[0])
        gap_lo, gap_hi = self._gaps_near(x1, eps)
        right = gap_lo >= x1
        left = gap_hi <= x1
        usable = right | left
        gap_lo, gap_hi, right = gap_lo[usable], gap_hi[usable], right[usable]
        edge = np.where(right, gap_lo - x1, x1 - gap_hi)
        width = gap_hi - gap_lo
        keep = edge < eps
        gap_lo, gap_hi, right, edge, width = gap_lo[keep], gap_hi[keep], right[keep], edge[keep], width[keep]
        with np.errstate(invalid="ignore"):
            raw = np.minimum(width / 2.0, (eps - edge) * (1.0 - EDGE_BACKOFF))
        centre1 = np.where(right, gap_lo + raw, gap_hi - raw)
        # a gap no wider than the ball: centre it exactly
        centred = raw >= width / 2.0
        centre1 = np.where(centred, 0.5 * (gap_lo + gap_hi), centre1)
        radii = raw * (1.0 - HOLE_SHRINK)
        dists = np.abs(centre1 - x1)
        ok = (radii > 0) & (dists > 0)
        centres = np.tile(x, (int(np.count_nonzero(ok)), 1))
        centres[:, 0] = centre1[ok]
        return centres, radii[ok], dists[ok]

    def ball_is_clear(self, h: Sequence[float], r: float) -> bool:
        centre = Interval.point(float(h[0]))
        left = centre - r
        right = centre + r
        i = int(np.searchsorted(self.base.hi, left.lo, side="right"))
        return i == len(self.base) or bool(self.base.lo[i] >= right.hi)

    def find_hole(self, x: Sequence[float], eps: float) -> HoleWitness:
        if self.mode.kind == PorosityMode.POWER_P:
            point = as_point(x, dim=self.ambient_dim)
            if self.ratio is None or self.depth is None:
                raise ParameterError("Power-p holes need a Cantor cylinder with known ratio and depth")
            witness = power_p_witness(self.ratio, self.depth, float(point[0]), eps, self.mode.value, self._lengths)
            h = point.copy()
            h[0] = witness.h[0]
            return HoleWitness(h=h, r=witness.r, d=witness.d)
        return self.find_hole_c(x, eps)

    def inflated(self, delta: float) -> "CylinderOracle":
        return CylinderOracle(self.base.dilate(delta), self.mode, kind=f"{self.kind}+{delta:.3g}",
                              ambient_dim=self.ambient_dim)

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_empty or count <= 0:
            return np.empty((0, self.ambient_dim))
        widths = self.base.hi - self.base.lo
        idx = rng.choice(widths.size, size=count, p=widths / widths.sum())
        pts = np.zeros((count, self.ambient_dim))
        pts[:, 0] = self.base.lo[idx] + rng.random(count) * widths[idx]
        return pts


def power_p_witness(ratio: float, depth: int, x: float, eps: float, p: float,
                    lengths: Optional[Sequence[float]] = None) -> HoleWitness:
    """Concentric-hole recipe: the level-(N+1) gap inside x's level-N interval."""
    if 2.0 ** p * ratio <= 1.0:
        raise ParameterError(f"Power-p witnesses need 2^p*mu > 1, got 2^{p}*{ratio} = {2.0 ** p * ratio:.6g}")
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    level = max(0, math.ceil(math.log(2.0) / math.log(2.0 ** p * ratio) - 1.0 - 1e-12))
    while 2.0 ** -(level + 1) >= eps:
        level += 1
    if depth < level + 1:
        raise DepthError(required_depth=level + 1, available_depth=depth)
    lengths = lengths if lengths is not None else child_lengths(ratio, depth)
    cell = _descend(ratio, lengths, x, level)
    if cell is None or _descend(ratio, lengths, x, depth) is None:
        raise PreconditionError(f"x={x} is not in the depth-{depth} set")
    lo, hi = cell
    gap_lo, gap_hi = lo + lengths[level + 1], hi - lengths[level + 1]
    h1 = 0.5 * (gap_lo + gap_hi)
    r = 0.5 * (gap_hi - gap_lo) * (1.0 - HOLE_SHRINK)
    d = abs(h1 - x)
    logger.debug(f"Power-p witness at x={x}: level {level}, h={h1:.6g}, r={r:.6g}, d={d:.6g}")
    return HoleWitness(h=np.array([h1, 0.0]), r=r, d=d)


def find_hole_power_p(spec: CantorSpec, x: float, eps: float, p: float) -> HoleWitness:
    return power_p_witness(spec.mu, spec.depth, x, eps, p)


def find_hole_c_porous(oracle: PorousSetOracle, x: Sequence[float], eps: float) -> HoleWitness:
    if oracle.mode.kind != PorosityMode.C_POROUS:
        raise ParameterError(f"Oracle {oracle.kind} is not in c-porous mode")
    return oracle.find_hole_c(x, eps)


def contains(oracle: PorousSetOracle, pt: Sequence[float], resolution: float) -> Membership:
    return oracle.contains(pt, resolution)


def verify_witness(oracle: PorousSetOracle, x: Sequence[float], eps: float, witness: HoleWitness) -> bool:
    """Independent re-check of a witness: disjointness, d < eps and the mode inequality."""
    dist = distance_enclosure(witness.h, x)
    if not dist.certainly_below(eps) or not oracle.ball_is_clear(witness.h, witness.r):
        return False
    r = Interval.point(witness.r)
    if oracle.mode.kind == PorosityMode.C_POROUS:
        return r.certainly_above(dist * oracle.mode.value)
    power = Interval(dist.lo ** oracle.mode.value, math.nextafter(dist.hi ** oracle.mode.value, math.inf))
    return r.certainly_above(power)


def estimate_porosity_constant(oracle: PorousSetOracle, sample_count: int, scales: Sequence[float],
                               seed: int = 0) -> float:
    """Infimum over sampled points and scales of the best achievable r/d."""
    rng = np.random.default_rng(seed)
    points = oracle.sample_points(sample_count, rng)
    if len(points) == 0 or len(scales) == 0:
        logger.warning("Porosity estimate over an empty sample; returning the vacuous value 1.0")
        return 1.0
    best = math.inf
    skipped = 0
    for point in points:
        for eps in scales:
            ratio = oracle.best_ratio(point, eps)
            if ratio is None:
                skipped += 1
                continue
            best = min(best, ratio)
    if skipped:
        logger.debug(f"Skipped {skipped} (point, scale) pairs with no hole in the truncation")
    if best == math.inf:
        logger.warning("No hole found at any sampled scale; returning the vacuous value 1.0")
        return 1.0
    return best


def fat_cantor_cylinder(spec: CantorSpec, mode: PorosityMode, ambient_dim: int = 2,
                        offset: float = 0.0) -> CylinderOracle:
    base = build_fat_cantor(spec)
    if offset and mode.kind != PorosityMode.C_POROUS:
        raise ParameterError("Power-p witnesses assume the untranslated construction")
    if offset:
        base = IntervalSet(base.lo + offset, base.hi + offset)
    return CylinderOracle(base, mode, kind="fat-cantor-product",
                          ratio=spec.mu, depth=spec.depth, ambient_dim=ambient_dim)


def ternary_cylinder(depth: int, c: float = 0.5, ambient_dim: int = 2, offset: float = 0.0) -> CylinderOracle:
    """Middle-thirds Cantor set at the given depth, optionally translated along the first axis."""
    base = build_cantor_levels(1.0 / 3.0, depth)
    if offset:
        base = IntervalSet(base.lo + offset, base.hi + offset)
    return CylinderOracle(base, PorosityMode.c_porous(c), kind="ternary-product",
                          ratio=1.0 / 3.0, depth=depth, ambient_dim=ambient_dim)


class FiniteUnionOracle(PorousSetOracle):
    """Union of finitely many oracles; the empty union is the empty set."""

    kind = "finite-union"

    def __init__(self, members: Sequence[PorousSetOracle], mode: Optional[PorosityMode] = None,
                 ambient_dim: Optional[int] = None):
        members = list(members)
        dim = ambient_dim or (members[0].ambient_dim if members else 2)
        if any(m.ambient_dim != dim for m in members):
            raise DomainError("Union members must share an ambient dimension")
        super().__init__(mode or (members[0].mode if members else PorosityMode.c_porous(0.5)), dim)
        self.members = members

    @property
    def is_empty(self) -> bool:
        return all(m.is_empty for m in self.members)

    @property
    def resolution_floor(self) -> float:
        return max((m.resolution_floor for m in self.members), default=ENDPOINT_SLACK)

    @property
    def first_coordinate_set(self) -> Optional[IntervalSet]:
        union = IntervalSet.empty()
        for m in self.members:
            base = m.first_coordinate_set
            if base is None:
                return None
            union = union | base
        return union

    def contains(self, pt: Sequence[float], resolution: float) -> Membership:
        answers = {m.contains(pt, resolution) for m in self.members}
        if Membership.INSIDE in answers:
            return Membership.INSIDE
        return Membership.UNKNOWN if Membership.UNKNOWN in answers else Membership.OUTSIDE

    def classify_ball(self, center: Sequence[float], radius: float) -> Membership:
        answers = {m.classify_ball(center, radius) for m in self.members}
        if Membership.INSIDE in answers:
            return Membership.INSIDE
        return Membership.UNKNOWN if Membership.UNKNOWN in answers else Membership.OUTSIDE

    def hole_candidates(self, x: Point, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        centres, radii, dists = [], [], []
        for m in self.members:
            if m.contains(x, ENDPOINT_SLACK) == Membership.OUTSIDE:
                continue
            mc, mr, md = m.hole_candidates(x, eps)
            for h, r, d in zip(mc, mr, md):
                if self.ball_is_clear(h, r):
                    centres.append(h)
                    radii.append(r)
                    dists.append(d)
        if not radii:
            return np.empty((0, self.ambient_dim)), np.empty(0), np.empty(0)
        return np.array(centres), np.array(radii), np.array(dists)

    def ball_is_clear(self, h: Sequence[float], r: float) -> bool:
        return all(m.ball_is_clear(h, r) for m in self.members)

    def inflated(self, delta: float) -> "FiniteUnionOracle":
        return FiniteUnionOracle([m.inflated(delta) for m in self.members], self.mode, self.ambient_dim)

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        live = [m for m in self.members if not m.is_empty]
        if not live or count <= 0:
            return np.empty((0, self.ambient_dim))
        owners = rng.integers(0, len(live), size=count)
        parts = [live[k].sample_points(int(np.count_nonzero(owners == k)), rng) for k in range(len(live))]
        return np.vstack(parts)


def empty_oracle(ambient_dim: int = 2) -> FiniteUnionOracle:
    return FiniteUnionOracle([], ambient_dim=ambient_dim)


@dataclass
class _Grid:
    occupied: np.ndarray
    origin: np.ndarray
    cell: np.ndarray
    boxes: np.ndarray = field(init=False)

    def __post_init__(self):
        ij = np.argwhere(self.occupied)
        lo = self.origin + ij * self.cell
        self.boxes = np.hstack([lo, lo + self.cell]) if ij.size else np.empty((0, 4))


class RasterizedOracle(PorousSetOracle):
    """A planar set given as closed occupied cells of a regular grid."""

    kind = "rasterized"

    def __init__(self, occupied: np.ndarray, bounds: Tuple[float, float, float, float], mode: PorosityMode):
        super().__init__(mode, ambient_dim=2)
        grid = np.asarray(occupied, dtype=bool)
        if grid.ndim != 2:
            raise DomainError(f"Raster must be 2-dimensional, got shape {grid.shape}")
        x0, x1, y0, y1 = bounds
        if not (x1 > x0 and y1 > y0):
            raise DomainError(f"Invalid raster bounds {bounds}")
        self.bounds = (float(x0), float(x1), float(y0), float(y1))
        cell = np.array([(x1 - x0) / grid.shape[0], (y1 - y0) / grid.shape[1]])
        self.grid = _Grid(grid, np.array([x0, y0], dtype=float), cell)

    @property
    def is_empty(self) -> bool:
        return not bool(self.grid.occupied.any())

    @property
    def resolution_floor(self) -> float:
        return float(self.grid.cell.min()) * 1e-3

    def _box_distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest occupied cell (inf when there is none)."""
        boxes = self.grid.boxes
        if boxes.shape[0] == 0:
            return np.full(len(pts), math.inf)
        dx = np.maximum(np.maximum(boxes[None, :, 0] - pts[:, None, 0], pts[:, None, 0] - boxes[None, :, 2]), 0.0)
        dy = np.maximum(np.maximum(boxes[None, :, 1] - pts[:, None, 1], pts[:, None, 1] - boxes[None, :, 3]), 0.0)
        return np.sqrt(dx * dx + dy * dy).min(axis=1)

    def _cells_meeting(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[slice, slice, bool]:
        g = self.grid
        start = np.floor((lo - g.origin) / g.cell).astype(int)
        stop = np.ceil((hi - g.origin) / g.cell).astype(int)
        shape = np.array(g.occupied.shape)
        inside_bounds = bool(np.all(start >= 0) and np.all(stop <= shape))
        start = np.clip(start, 0, shape)
        stop = np.clip(np.maximum(stop, start + 1), 0, shape)
        return slice(start[0], stop[0]), slice(start[1], stop[1]), inside_bounds

    def contains(self, pt: Sequence[float], resolution: float) -> Membership:
        if resolution <= 0:
            raise DomainError(f"Resolution must be positive, got {resolution}")
        dist = float(self._box_distance(np.asarray(pt, float)[None, :2])[0])
        if dist <= ENDPOINT_SLACK:
            return Membership.INSIDE
        return Membership.UNKNOWN if dist <= resolution else Membership.OUTSIDE

    def classify_ball(self, center: Sequence[float], radius: float) -> Membership:
        c = np.asarray(center, float)[:2]
        dist = float(self._box_distance(c[None, :])[0])
        if dist > radius:
            return Membership.OUTSIDE
        sx, sy, inside_bounds = self._cells_meeting(c - radius, c + radius)
        block = self.grid.occupied[sx, sy]
        if inside_bounds and block.size and bool(block.all()):
            return Membership.INSIDE
        return Membership.UNKNOWN

    def hole_candidates(self, x: Point, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = self.grid
        nx, ny = g.occupied.shape
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        free = ~g.occupied
        centres = g.origin + (np.stack([ii[free], jj[free]], axis=1) + 0.5) * g.cell
        if centres.size == 0:
            return np.empty((0, 2)), np.empty(0), np.empty(0)
        dists = np.linalg.norm(centres - np.asarray(x, float)[:2], axis=1)
        near = (dists < eps) & (dists > 0)
        centres, dists = centres[near], dists[near]
        radii = self._box_distance(centres) * (1.0 - HOLE_SHRINK)
        radii = np.minimum(radii, eps)
        ok = radii > 0
        return centres[ok], radii[ok], dists[ok]

    def ball_is_clear(self, h: Sequence[float], r: float) -> bool:
        dist = float(self._box_distance(np.asarray(h, float)[None, :2])[0])
        return math.nextafter(dist, -math.inf) >= math.nextafter(r, math.inf)

    def inflated(self, delta: float) -> "RasterizedOracle":
        g = self.grid
        pad = int(np.ceil(delta / g.cell.min()))
        grown = np.pad(g.occupied, pad)
        out = grown.copy()
        for di in range(-pad, pad + 1):
            for dj in range(-pad, pad + 1):
                gap = np.maximum(np.abs([di, dj]) - 1, 0) * g.cell
                if math.hypot(*gap) <= delta:
                    out |= np.roll(np.roll(grown, di, axis=0), dj, axis=1)
        x0, x1, y0, y1 = self.bounds
        ext = pad * g.cell
        return RasterizedOracle(out, (x0 - ext[0], x1 + ext[0], y0 - ext[1], y1 + ext[1]), self.mode)

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        boxes = self.grid.boxes
        if boxes.shape[0] == 0 or count <= 0:
            return np.empty((0, 2))
        idx = rng.integers(0, boxes.shape[0], size=count)
        u = rng.random((count, 2))
        return boxes[idx, :2] + u * (boxes[idx, 2:] - boxes[idx, :2])
