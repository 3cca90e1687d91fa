"""
Vitali candidate intervals and greedy disjoint covers of a curve preimage.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import DomainError, InvariantViolation, ParameterError, PreconditionError, ResolutionError
from .geometry import ENDPOINT_SLACK, CurveC1, Interval, IntervalSet, distance_enclosure
from .porous import HoleWitness, Membership, PorosityMode, PorousSetOracle
from .preimage import preimage_measure_on

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_RETRIES = 8
PROBES_PER_PIECE = 6
SPLIT_PROBES = 2
SPLIT_PIECES = 1024
ENVELOPE_SHARE = 0.9
MIN_PIECE = 1e-12


@dataclass(frozen=True)
class VitaliInterval:
    interval: Interval
    center: float
    witness: HoleWitness

    @property
    def length(self) -> float:
        return self.interval.length

    def row(self) -> Tuple[float, float, float, str, float, float]:
        coords = ";".join(repr(float(v)) for v in self.witness.h)
        return (self.interval.lo, self.interval.hi, self.center, coords, self.witness.r, self.witness.d)


@dataclass
class CoverSelection:
    """Pairwise-disjoint Vitali intervals selected against a target set B."""

    chosen: List[VitaliInterval]
    uncovered_bound: float
    target: IntervalSet = field(default_factory=IntervalSet.empty)
    budget: float = 0.0
    stalled: bool = False
    lam: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def total_length(self) -> float:
        return math.fsum(v.length for v in self.chosen)

    @property
    def target_measure(self) -> float:
        return self.target.total_length()

    @property
    def tight(self) -> bool:
        return self.total_length < self.target_measure + self.budget

    @property
    def union(self) -> IntervalSet:
        return IntervalSet.from_intervals(v.interval for v in self.chosen)

    def __len__(self) -> int:
        return len(self.chosen)


def candidate_interval(f: CurveC1, x: float, lam: float, theta: float, oracle: PorousSetOracle,
                       blocked: Optional[IntervalSet] = None, within: Optional[IntervalSet] = None,
                       retries: int = DEFAULT_RETRIES) -> VitaliInterval:
    """
    The interval [x - lam*d, x + lam*d] built from a hole near f(x).

    The interval stays clear of `blocked` and, when `within` is given, inside it.
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"Vitali centres must lie in (0, 1), got {x}")
    if lam <= 1.0:
        raise ParameterError(f"lambda must exceed 1, got {lam}")
    point = f(x)
    if oracle.contains(point, ENDPOINT_SLACK) == Membership.OUTSIDE:
        raise PreconditionError(f"f({x}) = {point.tolist()} is not in the set")
    room = blocked.distance_to(x) if blocked is not None else math.inf
    if within is not None:
        room = min(room, within.depth(x))
    cap = min(theta, x / lam, (1.0 - x) / lam, room / lam)
    if cap <= 0.0:
        raise PreconditionError(f"No room for a Vitali interval at x={x}")
    eps = cap
    last_error: Optional[ResolutionError] = None
    for attempt in range(retries + 1):
        try:
            witness = oracle.find_hole(point, eps)
        except ResolutionError as e:
            # no hole within eps means none within eps/2 either
            if e.reason in (ResolutionError.BELOW_FLOOR, ResolutionError.DEPTH_EXHAUSTED):
                raise
            last_error = e
            eps /= 2.0
            continue
        d = witness.d
        if d < cap:
            return VitaliInterval(Interval(x - lam * d, x + lam * d), x, witness)
        eps /= 2.0
    raise last_error or ResolutionError(ResolutionError.NOT_POROUS, f"No admissible hole at x={x} after {retries} retries")


def check_vitali_interval(v: VitaliInterval, f: CurveC1, lam: float, theta: float,
                          oracle: PorousSetOracle) -> List[str]:
    """Independent re-check of a Vitali interval; returns the failed conditions."""
    failures = []
    if not (0.0 < v.interval.lo and v.interval.hi < 1.0):
        failures.append("interval not inside (0, 1)")
    dist = distance_enclosure(v.witness.h, f(v.center))
    if not dist.certainly_below(theta):
        failures.append("hole distance not below theta")
    if abs(dist.hi - v.witness.d) > 1e-12 * max(1.0, v.witness.d) + (dist.hi - dist.lo):
        failures.append("recorded d differs from ||h - f(x)||")
    if oracle.mode.kind == PorosityMode.C_POROUS and not v.witness.r > oracle.mode.value * dist.hi:
        failures.append("hole radius not above c*d")
    if not oracle.ball_is_clear(v.witness.h, v.witness.r):
        failures.append("hole ball meets the set")
    if abs(v.interval.length - 2.0 * lam * v.witness.d) > 1e-12:
        failures.append("interval length differs from 2*lambda*d")
    return failures


def _probe(lo: float, hi: float, k: int, offset: float) -> float:
    if k == 0:
        return 0.5 * (lo + hi)
    u = (offset + k * GOLDEN) % 1.0
    return lo + (0.05 + 0.9 * u) * (hi - lo)


def select_disjoint_cover(f: CurveC1, oracle: PorousSetOracle, lam: float, theta: float, exclude: IntervalSet,
                          budget: float, seed: int, tol: float = 1e-9,
                          max_probes: int = 200_000) -> CoverSelection:
    """
    Greedy disjoint cover of B = f^-1(E) minus `exclude`.

    Uncovered pieces of B are kept in a max-heap by length. The largest piece is probed at
    its midpoint and then along a seeded golden-ratio sequence; the first admissible Vitali
    interval is committed. A piece whose probes all fail is split in half and both halves go
    back on the heap, down to a floor of |B| / SPLIT_PIECES. Pieces are re-clipped lazily
    against the committed intervals.

    Every interval is kept inside an open envelope V of B with |V| - |B| < budget, so the
    selected lengths always sum to less than |B| + budget.
    """
    if budget <= 0:
        raise DomainError(f"Cover budget must be positive, got {budget}")
    report = preimage_measure_on(f, oracle, exclude.complement(0.0, 1.0), tol)
    target = report.covered | report.uncertain
    target_len = target.total_length()
    if target.is_empty:
        return CoverSelection([], 0.0, target, budget, lam=lam)
    envelope = target.dilate(ENVELOPE_SHARE * budget / (2.0 * len(target)))
    floor = max(MIN_PIECE, target_len / SPLIT_PIECES)
    offset = float(np.random.default_rng(seed).random())
    heap: List[Tuple[float, float, float, int]] = [(-(b - a), a, b, PROBES_PER_PIECE) for a, b in target.to_rows()]
    heapq.heapify(heap)
    chosen: List[VitaliInterval] = []
    committed = IntervalSet.empty()
    covered_of_target = 0.0
    probes, failures = 0, {"not-porous-at-scale": 0, "depth-exhausted": 0, "precondition": 0, "no-room": 0}
    abandoned, splits = 0.0, 0
    while heap and target_len - covered_of_target >= budget and probes < max_probes:
        neg_len, a, b, tries = heapq.heappop(heap)
        live = IntervalSet([a], [b]) - committed
        if live.total_length() < -neg_len:
            for piece in live:
                if piece.length > MIN_PIECE:
                    heapq.heappush(heap, (-piece.length, piece.lo, piece.hi, tries))
            continue
        blocked = committed | exclude
        selected = None
        for k in range(tries):
            probes += 1
            x = _probe(a, b, k, offset)
            if not 0.0 < x < 1.0:
                continue
            try:
                selected = candidate_interval(f, x, lam, theta, oracle, blocked=blocked, within=envelope)
                break
            except ResolutionError as e:
                failures[e.reason] = failures.get(e.reason, 0) + 1
            except PreconditionError as e:
                key = "no-room" if "room" in str(e) else "precondition"
                failures[key] += 1
        if selected is None:
            half = 0.5 * (b - a)
            if half < floor:
                abandoned += b - a
                continue
            splits += 1
            mid = a + half
            heapq.heappush(heap, (-half, a, mid, SPLIT_PROBES))
            heapq.heappush(heap, (-(b - mid), mid, b, SPLIT_PROBES))
            continue
        chosen.append(selected)
        piece = IntervalSet([selected.interval.lo], [selected.interval.hi])
        committed = committed | piece
        covered_of_target += (target & piece).total_length()
        for rest in IntervalSet([a], [b]) - piece:
            if rest.length > MIN_PIECE:
                heapq.heappush(heap, (-rest.length, rest.lo, rest.hi, tries))
    uncovered = max(0.0, target_len - covered_of_target)
    stalled = uncovered >= budget
    chosen.sort(key=lambda v: -v.length)
    diagnostics = {"probes": probes, "failures": failures, "abandoned_length": abandoned, "splits": splits,
                   "target_measure": target_len, "envelope_measure": envelope.total_length(),
                   "uncovered": uncovered}
    selection = CoverSelection(chosen, uncovered, target, budget, stalled, lam, diagnostics)
    if not selection.tight:
        raise InvariantViolation("vitali", f"Selected length {selection.total_length:.6g} is not below "
                                           f"|B| + budget = {target_len + budget:.6g}")
    if stalled:
        logger.warning(f"Cover stalled with uncovered measure {uncovered:.4g} >= budget {budget:.4g} "
                       f"after {probes} probes: {failures}")
    else:
        logger.debug(f"Cover selected {len(chosen)} intervals, uncovered {uncovered:.3g} < {budget:.3g}")
    return selection


def truncate_cover(sel: CoverSelection, tail_budget: float) -> Tuple[CoverSelection, int]:
    """Smallest K such that the intervals after the first K have total length < tail_budget."""
    if tail_budget <= 0:
        raise DomainError(f"Tail budget must be positive, got {tail_budget}")
    lengths = [v.length for v in sel.chosen]
    k = 0
    while k < len(lengths) and math.fsum(lengths[k:]) >= tail_budget:
        k += 1
    tail = math.fsum(lengths[k:])
    head = CoverSelection(sel.chosen[:k], sel.uncovered_bound + tail, sel.target, sel.budget,
                          sel.stalled, sel.lam, dict(sel.diagnostics, truncated_tail=tail))
    return head, k
