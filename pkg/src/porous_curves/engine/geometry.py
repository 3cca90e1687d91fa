"""
Core geometry: points, intervals, interval sets and piecewise-cubic C1 curves.

Every other engine module builds on the types defined here. Curves are stored as
shared Hermite knot data (position plus derivative at every breakpoint), so value
and derivative continuity hold exactly rather than up to a tolerance. Sup norms are
computed per polynomial piece from the critical points of the squared norm and are
reported as a `Bracket`.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError

logger = logging.getLogger(__name__)

Point = np.ndarray

ENDPOINT_SLACK = 1e-12
SUP_REL_SLACK = 1e-12
SUP_ABS_SLACK = 1e-15
SAMPLES_PER_PIECE = 16
ROOT_IMAG_TOL = 1e-9
RECORD_DIGITS = 17
KNOT_MERGE_TOL = 1e-9


def as_point(coords: Sequence[float], dim: Optional[int] = None) -> Point:
    """Validate coordinates and return them as a float vector."""
    arr = np.array(coords, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError(f"A point needs at least 2 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"Point coordinates must be finite: {arr.tolist()}")
    if dim is not None and arr.size != dim:
        raise DomainError(f"Dimension mismatch: expected {dim}, got {arr.size}")
    return arr


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


@dataclass(frozen=True)
class Interval:
    """A closed interval [lo, hi] with outward-rounded arithmetic."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise DomainError(f"Invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(float(x), float(x))

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, t: float) -> bool:
        return self.lo <= t <= self.hi

    def __add__(self, other: Union["Interval", float]) -> "Interval":
        other = _as_interval(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other: Union["Interval", float]) -> "Interval":
        other = _as_interval(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other: float) -> "Interval":
        return _as_interval(other) - self

    def __mul__(self, other: Union["Interval", float]) -> "Interval":
        other = _as_interval(other)
        products = [self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi]
        return Interval(_down(min(products)), _up(max(products)))

    __rmul__ = __mul__

    def square(self) -> "Interval":
        if self.lo >= 0:
            return Interval(_down(self.lo * self.lo), _up(self.hi * self.hi))
        if self.hi <= 0:
            return Interval(_down(self.hi * self.hi), _up(self.lo * self.lo))
        top = max(-self.lo, self.hi)
        return Interval(0.0, _up(top * top))

    def sqrt(self) -> "Interval":
        low = math.sqrt(self.lo) if self.lo > 0 else 0.0
        return Interval(max(0.0, _down(low)), _up(math.sqrt(max(self.hi, 0.0))))

    def certainly_below(self, other: Union["Interval", float]) -> bool:
        return self.hi < _as_interval(other).lo

    def certainly_above(self, other: Union["Interval", float]) -> bool:
        return self.lo > _as_interval(other).hi


def _as_interval(value: Union[Interval, float]) -> Interval:
    if isinstance(value, Interval):
        return value
    return Interval.point(float(value))


def distance_enclosure(a: Sequence[float], b: Sequence[float]) -> Interval:
    """Enclose the Euclidean distance between two points with interval arithmetic."""
    total = Interval.point(0.0)
    for x, y in zip(a, b):
        total = total + (Interval.point(float(x)) - float(y)).square()
    return total.sqrt()


@dataclass(frozen=True)
class Bracket:
    """Certified two-sided bound on a supremum."""

    lower: float
    upper: float

    @classmethod
    def from_value(cls, value: float) -> "Bracket":
        if value == 0.0:
            return cls(0.0, 0.0)
        return cls(value, value * (1.0 + SUP_REL_SLACK) + SUP_ABS_SLACK)

    def __add__(self, other: "Bracket") -> "Bracket":
        upper = self.upper + other.upper
        return Bracket(self.lower + other.lower, _up(upper) if upper else 0.0)

    @staticmethod
    def maximum(brackets: Iterable["Bracket"]) -> "Bracket":
        lower, upper = 0.0, 0.0
        for b in brackets:
            lower = max(lower, b.lower)
            upper = max(upper, b.upper)
        return Bracket(lower, upper)


@dataclass(frozen=True)
class MeasureEstimate:
    """A Lebesgue measure value together with a two-sided error bound."""

    value: float
    error_bound: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.error_bound < 0:
            raise DomainError(f"Negative measure estimate: {self.value} ± {self.error_bound}")

    @property
    def lower(self) -> float:
        return max(0.0, self.value - self.error_bound)

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    def __add__(self, other: "MeasureEstimate") -> "MeasureEstimate":
        return MeasureEstimate(self.value + other.value, self.error_bound + other.error_bound)

    def agrees_with(self, other: "MeasureEstimate", slack: float = 0.0) -> bool:
        return abs(self.value - other.value) <= self.error_bound + other.error_bound + slack


class IntervalSet:
    """
    A finite union of pairwise-disjoint closed intervals, sorted by left endpoint.

    Construction normalizes the input: intervals are sorted, touching or overlapping
    intervals are merged and zero-length intervals are dropped (they carry no measure).
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Iterable[float] = (), hi: Iterable[float] = ()):
        lo_arr = np.array(list(lo) if not isinstance(lo, np.ndarray) else lo, dtype=float).ravel()
        hi_arr = np.array(list(hi) if not isinstance(hi, np.ndarray) else hi, dtype=float).ravel()
        if lo_arr.shape != hi_arr.shape:
            raise DomainError("Interval endpoint arrays differ in length")
        if np.any(lo_arr > hi_arr) or np.any(np.isnan(lo_arr)) or np.any(np.isnan(hi_arr)):
            raise DomainError("Every interval needs lo <= hi")
        lo_arr, hi_arr = _normalize(lo_arr, hi_arr)
        lo_arr.setflags(write=False)
        hi_arr.setflags(write=False)
        self.lo = lo_arr
        self.hi = hi_arr

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @classmethod
    def unit(cls) -> "IntervalSet":
        return cls([0.0], [1.0])

    @classmethod
    def from_intervals(cls, intervals: Iterable[Union[Interval, Tuple[float, float]]]) -> "IntervalSet":
        pairs = [(iv.lo, iv.hi) if isinstance(iv, Interval) else (iv[0], iv[1]) for iv in intervals]
        if not pairs:
            return cls()
        lo, hi = zip(*pairs)
        return cls(lo, hi)

    def __len__(self) -> int:
        return int(self.lo.size)

    def __iter__(self) -> Iterator[Interval]:
        for a, b in zip(self.lo.tolist(), self.hi.tolist()):
            yield Interval(a, b)

    def __repr__(self) -> str:
        body = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo, self.hi))
        return f"IntervalSet({body})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    @property
    def intervals(self) -> List[Interval]:
        return list(self)

    @property
    def is_empty(self) -> bool:
        return self.lo.size == 0

    def total_length(self) -> float:
        return math.fsum((self.hi - self.lo).tolist())

    def contains(self, t: float, slack: float = 0.0) -> bool:
        i = int(np.searchsorted(self.lo, t + slack, side="right")) - 1
        return i >= 0 and t <= self.hi[i] + slack

    def mask(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized closed membership."""
        t = np.asarray(ts, dtype=float)
        if self.is_empty:
            return np.zeros(t.shape, dtype=bool)
        i = np.searchsorted(self.lo, t, side="right") - 1
        return (i >= 0) & (t <= self.hi[np.maximum(i, 0)])

    def distance_to(self, t: float) -> float:
        """Distance from t to the set (0 inside); infinite for the empty set."""
        if self.is_empty:
            return math.inf
        i = int(np.searchsorted(self.lo, t, side="right")) - 1
        best = math.inf
        if i >= 0:
            best = 0.0 if t <= self.hi[i] else t - self.hi[i]
        if i + 1 < self.lo.size:
            best = min(best, self.lo[i + 1] - t)
        return float(best)

    def depth(self, t: float) -> float:
        """Distance from t to the complement of the set (0 outside)."""
        if self.is_empty:
            return 0.0
        i = int(np.searchsorted(self.lo, t, side="right")) - 1
        if i < 0 or t > self.hi[i]:
            return 0.0
        return float(min(t - self.lo[i], self.hi[i] - t))

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        if self.is_empty or other.is_empty:
            return IntervalSet()
        return _sweep(self, other, threshold=2)

    def complement(self, lo: float = 0.0, hi: float = 1.0) -> "IntervalSet":
        """Closure of the complement inside [lo, hi]."""
        clipped = self.clip(lo, hi)
        starts = np.concatenate([[lo], clipped.hi])
        ends = np.concatenate([clipped.lo, [hi]])
        return IntervalSet(starts, ends)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if self.is_empty or other.is_empty:
            return self
        lo = min(float(self.lo[0]), float(other.lo[0]))
        hi = max(float(self.hi[-1]), float(other.hi[-1]))
        return self.intersection(other.complement(lo, hi))

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        if lo > hi:
            return IntervalSet()
        return IntervalSet(np.clip(self.lo, lo, hi), np.clip(self.hi, lo, hi))

    def dilate(self, delta: float) -> "IntervalSet":
        if delta < 0:
            raise DomainError(f"Dilation radius must be nonnegative, got {delta}")
        return IntervalSet(self.lo - delta, self.hi + delta)

    def meets_open(self, lo: float, hi: float, slack: float = ENDPOINT_SLACK) -> bool:
        """True when some member meets the open interval (lo, hi) by more than slack."""
        if self.is_empty:
            return False
        return bool(np.any((self.lo < hi - slack) & (self.hi > lo + slack)))

    def is_subset_of(self, other: "IntervalSet", slack: float = 0.0) -> bool:
        return self.difference(other.dilate(slack)).total_length() == 0.0

    def to_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.lo.tolist(), self.hi.tolist()))


def _normalize(lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return np.empty(0), np.empty(0)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    running = np.maximum.accumulate(hi)
    starts = np.ones(lo.size, dtype=bool)
    starts[1:] = lo[1:] > running[:-1]
    idx = np.flatnonzero(starts)
    return lo[idx].copy(), np.maximum.reduceat(hi, idx)


def _sweep(a: IntervalSet, b: IntervalSet, threshold: int) -> IntervalSet:
    points = np.concatenate([a.lo, a.hi, b.lo, b.hi])
    deltas = np.concatenate([
        np.ones(a.lo.size), -np.ones(a.hi.size), np.ones(b.lo.size), -np.ones(b.hi.size),
    ])
    # starts sort before ends at equal coordinates (closed intervals)
    order = np.lexsort((-deltas, points))
    points, deltas = points[order], deltas[order]
    depth = np.cumsum(deltas)
    seg = np.flatnonzero(depth[:-1] >= threshold)
    return IntervalSet(points[seg], points[seg + 1])


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.union(b)


def intersection(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.intersection(b)


def difference(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.difference(b)


def complement(a: IntervalSet) -> IntervalSet:
    return a.complement(0.0, 1.0)


def total_length(a: IntervalSet) -> float:
    return a.total_length()


def merge_knots(knots: Sequence[float], tol: float = KNOT_MERGE_TOL,
                keep: Optional[Iterable[float]] = None) -> np.ndarray:
    """
    Collapse knots closer than tol to their left neighbour.

    The end knots and every knot listed in `keep` survive; two pinned knots closer than tol
    are both kept.
    """
    ts = np.unique(np.asarray(knots, dtype=float))
    if ts.size <= 2:
        return ts
    pinned = {float(ts[0]), float(ts[-1])}
    if keep is not None:
        pinned.update(float(t) for t in keep)
    out: List[float] = [float(ts[0])]
    for t in ts[1:].tolist():
        if t - out[-1] >= tol:
            out.append(t)
        elif t in pinned and out[-1] not in pinned:
            out[-1] = t
        elif t in pinned:
            out.append(t)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class CurveC1:
    """
    A map [0, 1] -> R^d stored as piecewise-cubic Hermite data.

    Attributes:
        breakpoints: strictly increasing knots with breakpoints[0] = 0 and breakpoints[-1] = 1.
        positions: curve value at every knot, shape (m+1, d).
        derivatives: right derivative at every knot (left derivative at t = 1), shape (m+1, d).
        left_derivatives: left derivative at every knot when the curve has kinks. None means
            left and right derivatives coincide everywhere and the curve is genuinely C1.
    """

    breakpoints: np.ndarray
    positions: np.ndarray
    derivatives: np.ndarray
    left_derivatives: Optional[np.ndarray] = None

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        pos = np.array(self.positions, dtype=float)
        der = np.array(self.derivatives, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise DomainError("A curve needs at least two breakpoints")
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise DomainError("Breakpoints must increase strictly from 0 to 1")
        if pos.ndim != 2 or pos.shape[0] != bp.size or pos.shape[1] < 2:
            raise DomainError(f"Positions must have shape ({bp.size}, d>=2), got {pos.shape}")
        if der.shape != pos.shape:
            raise DomainError(f"Derivatives must have shape {pos.shape}, got {der.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(der))):
            raise DomainError("Curve knot data must be finite")
        left = None
        if self.left_derivatives is not None:
            left = np.array(self.left_derivatives, dtype=float)
            if left.shape != pos.shape or not np.all(np.isfinite(left)):
                raise DomainError("Left derivatives must match the knot data shape")
            left[0] = der[0]
            der[-1] = left[-1]
            if np.array_equal(left, der):
                left = None
        for arr in (bp, pos, der) + ((left,) if left is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "derivatives", der)
        object.__setattr__(self, "left_derivatives", left)

    # construction helpers

    @classmethod
    def line(cls, start: Sequence[float], velocity: Sequence[float]) -> "CurveC1":
        p0 = as_point(start)
        v = as_point(velocity, dim=p0.size)
        return cls(np.array([0.0, 1.0]), np.vstack([p0, p0 + v]), np.vstack([v, v]))

    @classmethod
    def from_hermite(
        cls,
        breakpoints: Sequence[float],
        positions: Sequence[Sequence[float]],
        derivatives: Sequence[Sequence[float]],
        left_derivatives: Optional[Sequence[Sequence[float]]] = None,
    ) -> "CurveC1":
        return cls(np.asarray(breakpoints, float), np.asarray(positions, float),
                   np.asarray(derivatives, float),
                   None if left_derivatives is None else np.asarray(left_derivatives, float))

    @classmethod
    def polyline(cls, breakpoints: Sequence[float], positions: Sequence[Sequence[float]]) -> "CurveC1":
        """Piecewise-linear curve through the given knots; kinks are recorded, not smoothed."""
        bp = np.asarray(breakpoints, float)
        pos = np.asarray(positions, float)
        slopes = np.diff(pos, axis=0) / np.diff(bp)[:, None]
        right = np.vstack([slopes, slopes[-1:]])
        left = np.vstack([slopes[:1], slopes])
        return cls(bp, pos, right, left)

    @classmethod
    def sample_hermite(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        deriv: Callable[[np.ndarray], np.ndarray],
        pieces: int,
    ) -> "CurveC1":
        """Hermite interpolant of a smooth map given its value and derivative callables."""
        if pieces < 1:
            raise DomainError(f"Need at least one piece, got {pieces}")
        bp = np.linspace(0.0, 1.0, pieces + 1)
        return cls(bp, np.asarray(func(bp), float), np.asarray(deriv(bp), float))

    # structure

    @property
    def dim(self) -> int:
        return int(self.positions.shape[1])

    @property
    def pieces(self) -> int:
        return int(self.breakpoints.size - 1)

    @property
    def left(self) -> np.ndarray:
        """Left derivative at every knot (equal to the right one for C1 curves)."""
        return self.derivatives if self.left_derivatives is None else self.left_derivatives

    @property
    def kinks(self) -> np.ndarray:
        """Interior knots where the one-sided derivatives differ."""
        if self.left_derivatives is None:
            return np.empty(0)
        differ = np.any(self.left_derivatives != self.derivatives, axis=1)
        differ[0] = differ[-1] = False
        return self.breakpoints[differ]

    @property
    def is_c1(self) -> bool:
        return self.kinks.size == 0

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Taylor coefficients per piece around its left knot, shape (m, 4, d)."""
        h = np.diff(self.breakpoints)[:, None]
        p0, p1 = self.positions[:-1], self.positions[1:]
        v0, v1 = self.derivatives[:-1], self.left[1:]
        slope = (p1 - p0) / h
        c2 = (3.0 * slope - 2.0 * v0 - v1) / h
        c3 = (v0 + v1 - 2.0 * slope) / (h * h)
        return np.stack([p0, v0, c2, c3], axis=1)

    def piece_index(self, t: float) -> int:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(max(i, 0), self.pieces - 1)

    def taylor_at(self, t: float) -> np.ndarray:
        """Cubic coefficients (4, d) of the piece containing t, re-centred at t."""
        i = self.piece_index(t)
        return shift_coefficients(self.coefficients[i], t - self.breakpoints[i])

    # evaluation

    def evaluate(self, ts: Union[float, Sequence[float], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorized positions and derivatives; knots return their stored data."""
        t = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
            raise DomainError("Curve parameters must lie in [0, 1]")
        idx = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, self.pieces - 1)
        s = (t - self.breakpoints[idx])[:, None]
        c = self.coefficients[idx]
        pos = c[:, 0] + s * (c[:, 1] + s * (c[:, 2] + s * c[:, 3]))
        der = c[:, 1] + s * (2.0 * c[:, 2] + 3.0 * s * c[:, 3])
        at_end = t == 1.0
        if np.any(at_end):
            pos[at_end] = self.positions[-1]
            der[at_end] = self.left[-1]
        return pos, der

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)[0][0]

    def knot_data(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, right derivative and left derivative at parameter t."""
        j = int(np.searchsorted(self.breakpoints, t))
        if j < self.breakpoints.size and self.breakpoints[j] == t:
            return self.positions[j].copy(), self.derivatives[j].copy(), self.left[j].copy()
        pos, der = self.evaluate(t)
        return pos[0], der[0], der[0].copy()

    # algebra

    def __add__(self, other: "CurveC1") -> "CurveC1":
        _check_same_dim(self, other)
        # near-coincident knots make the Hermite slopes (p1 - p0) / h numerically useless
        knots = merge_knots(np.union1d(self.breakpoints, other.breakpoints),
                            keep=np.union1d(self.kinks, other.kinks))
        pos, right, left = [], [], []
        for t in knots.tolist():
            pa, ra, la = self.knot_data(t)
            pb, rb, lb = other.knot_data(t)
            pos.append(pa + pb)
            right.append(ra + rb)
            left.append(la + lb)
        return CurveC1(knots, np.array(pos), np.array(right), np.array(left))

    def __sub__(self, other: "CurveC1") -> "CurveC1":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "CurveC1":
        left = None if self.left_derivatives is None else self.left_derivatives * factor
        return CurveC1(self.breakpoints, self.positions * factor, self.derivatives * factor, left)

    def translated(self, offset: Sequence[float]) -> "CurveC1":
        vec = as_point(offset, dim=self.dim)
        return CurveC1(self.breakpoints, self.positions + vec, self.derivatives, self.left_derivatives)

    def length_bound(self) -> float:
        """Upper bound on the arc length: per-piece derivative sup times piece width."""
        widths = np.diff(self.breakpoints)
        total = 0.0
        for i in range(self.pieces):
            total += _sup_vector_poly(_derivative_coefficients(self.coefficients[i]), widths[i]).upper * widths[i]
        return _up(total)

    # serialization

    def to_record(self) -> Dict[str, Any]:
        fmt = lambda arr: [format(float(x), f".{RECORD_DIGITS}g") for x in np.ravel(arr)]
        record = {
            "dim": self.dim,
            "breakpoints": fmt(self.breakpoints),
            "positions": fmt(self.positions),
            "derivatives": fmt(self.derivatives),
        }
        if self.left_derivatives is not None:
            record["left_derivatives"] = fmt(self.left_derivatives)
        return record

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "CurveC1":
        dim = int(record["dim"])
        parse = lambda key: np.array([float(x) for x in record[key]]).reshape(-1, dim)
        bp = np.array([float(x) for x in record["breakpoints"]])
        left = parse("left_derivatives") if "left_derivatives" in record else None
        return cls(bp, parse("positions"), parse("derivatives"), left)


def _check_same_dim(f: CurveC1, g: CurveC1) -> None:
    if f.dim != g.dim:
        raise DomainError(f"Dimension mismatch: {f.dim} vs {g.dim}")


def shift_coefficients(c: np.ndarray, u: float) -> np.ndarray:
    """Re-centre cubic Taylor coefficients (4, d) from s = 0 to s = u."""
    if u == 0.0:
        return c.copy()
    c0, c1, c2, c3 = c
    return np.stack([
        c0 + u * (c1 + u * (c2 + u * c3)),
        c1 + u * (2.0 * c2 + 3.0 * u * c3),
        c2 + 3.0 * u * c3,
        c3,
    ])


def _derivative_coefficients(c: np.ndarray) -> np.ndarray:
    return np.stack([c[1], 2.0 * c[2], 3.0 * c[3]])


def _sup_vector_poly(coefs: np.ndarray, width: float) -> Bracket:
    """Sup of ||q(s)|| over s in [0, width] for a vector polynomial with coefficients (k, d)."""
    if not np.any(coefs):
        return Bracket(0.0, 0.0)
    squared = np.zeros(1)
    for j in range(coefs.shape[1]):
        squared = npoly.polyadd(squared, npoly.polymul(coefs[:, j], coefs[:, j]))
    squared = npoly.polytrim(squared)
    candidates = [np.array([0.0, width]), np.linspace(0.0, width, SAMPLES_PER_PIECE)]
    if squared.size > 2:
        crit = npoly.polyder(squared)
        crit = npoly.polytrim(crit)
        if crit.size > 1 and np.any(crit):
            roots = npoly.polyroots(crit)
            real = roots[np.abs(roots.imag) <= ROOT_IMAG_TOL * (1.0 + np.abs(roots.real))].real
            candidates.append(real[(real > 0.0) & (real < width)])
    s = np.concatenate(candidates)
    values = npoly.polyval(s, coefs)
    return Bracket.from_value(float(np.max(np.linalg.norm(values, axis=0))))


def sup_norm_bracket(f: CurveC1) -> Bracket:
    widths = np.diff(f.breakpoints)
    return Bracket.maximum(_sup_vector_poly(f.coefficients[i], widths[i]) for i in range(f.pieces))


def piece_derivative_sups(f: CurveC1) -> List[Bracket]:
    """Per-piece bracket on sup||f'|| (one-sided derivatives at kinks)."""
    widths = np.diff(f.breakpoints)
    return [_sup_vector_poly(_derivative_coefficients(f.coefficients[i]), widths[i]) for i in range(f.pieces)]


def sup_derivative_norm_bracket(f: CurveC1) -> Bracket:
    return Bracket.maximum(piece_derivative_sups(f))


def sup_norm(f: CurveC1) -> float:
    return sup_norm_bracket(f).lower


def sup_derivative_norm(f: CurveC1) -> float:
    """sup_t ||f'(t)||, the derivative cap M used throughout the perturbation steps."""
    return sup_derivative_norm_bracket(f).lower


def gamma1_components(f: CurveC1, g: CurveC1) -> Tuple[Bracket, Bracket]:
    """Brackets for sup||f - g|| and sup||f' - g'|| over merged pieces."""
    _check_same_dim(f, g)
    knots = np.union1d(f.breakpoints, g.breakpoints)
    value_parts, deriv_parts = [], []
    for u0, u1 in zip(knots[:-1].tolist(), knots[1:].tolist()):
        i, j = f.piece_index(u0), g.piece_index(u0)
        cf = shift_coefficients(f.coefficients[i], u0 - f.breakpoints[i])
        cg = shift_coefficients(g.coefficients[j], u0 - g.breakpoints[j])
        diff = cf - cg
        value_parts.append(_sup_vector_poly(diff, u1 - u0))
        deriv_parts.append(_sup_vector_poly(_derivative_coefficients(diff), u1 - u0))
    return Bracket.maximum(value_parts), Bracket.maximum(deriv_parts)


def gamma1_distance_bracket(f: CurveC1, g: CurveC1) -> Bracket:
    value, deriv = gamma1_components(f, g)
    return value + deriv


def gamma1_distance(f: CurveC1, g: CurveC1) -> float:
    """sup||f - g|| + sup||f' - g'||."""
    return gamma1_distance_bracket(f, g).lower


def eval_curve(curve: CurveC1, t: float) -> Tuple[Point, Point]:
    """Position and derivative of the curve at t."""
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"Curve parameter must lie in [0, 1], got {t}")
    pos, der = curve.evaluate(t)
    return pos[0], der[0]


def taylor_cells(f: CurveC1, lo: float, hi: float) -> Iterator[Tuple[float, float, np.ndarray]]:
    """Yield (u0, u1, coefficients) for every piece of f meeting [lo, hi], re-centred at u0."""
    inner = f.breakpoints[(f.breakpoints > lo) & (f.breakpoints < hi)]
    edges = [lo, *inner.tolist(), hi]
    for u0, u1 in zip(edges[:-1], edges[1:]):
        if u1 <= u0:
            continue
        i = f.piece_index(u0)
        yield u0, u1, shift_coefficients(f.coefficients[i], u0 - f.breakpoints[i])


def sup_on(f: CurveC1, lo: float, hi: float, derivative: bool = False) -> Bracket:
    """Bracket on sup||f|| (or sup||f'||) over [lo, hi]."""
    parts = []
    for u0, u1, c in taylor_cells(f, lo, hi):
        parts.append(_sup_vector_poly(_derivative_coefficients(c) if derivative else c, u1 - u0))
    return Bracket.maximum(parts)
