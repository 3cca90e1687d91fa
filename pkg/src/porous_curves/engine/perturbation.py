"""
Tent perturbations, hole intervals and the C1 smoothing of a perturbed curve.

A tent lifts f(x_k) onto the centre of a hole ball and vanishes at the ends of its
Vitali interval. The hole interval R_k is the component around x_k of the parameters
that the perturbed curve keeps inside that ball. Smoothing replaces the three kinks of
each tent by short quadratic blends so the result is C1 again.

Tent profiles are kept as scalar shapes multiplying the peak vector p_k, so every
piece of the smoothed curve is an exact polynomial and can be stored as Hermite data.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError, InvariantViolation, PreconditionError
from .geometry import (ROOT_IMAG_TOL, CurveC1, Interval, IntervalSet, Point, gamma1_components, merge_knots,
                       sup_derivative_norm_bracket, sup_on, taylor_cells)
from .porous import HoleWitness, PorosityMode, PorousSetOracle
from .vitali import CoverSelection

logger = logging.getLogger(__name__)

CASE_FULL = "full-half-width"
CASE_BOUNDARY = "boundary-hit"

BALL_NET = 64
BALL_REFINE = 10
BALL_END_SLACK = 1e-9
AGREEMENT_TOL = 1e-10


@dataclass(frozen=True)
class Tent:
    """One tent: zero at a and b, equal to the peak vector at x, affine in between."""

    a: float
    x: float
    b: float
    peak: Point
    witness: HoleWitness
    lam: float

    @property
    def interval(self) -> Interval:
        return Interval(self.a, self.b)

    @property
    def left_width(self) -> float:
        return self.x - self.a

    @property
    def right_width(self) -> float:
        return self.b - self.x

    @property
    def slope(self) -> float:
        """Largest derivative norm of the tent, ||p|| / (lambda d) up to rounding."""
        return float(np.linalg.norm(self.peak)) / min(self.left_width, self.right_width)

    def phi(self, ts: np.ndarray) -> np.ndarray:
        t = np.asarray(ts, dtype=float)
        rising = (t - self.a) / self.left_width
        falling = (self.b - t) / self.right_width
        inside = (t > self.a) & (t < self.b)
        return np.where(inside, np.where(t <= self.x, rising, falling), 0.0)

    def phi_slope(self, ts: np.ndarray) -> np.ndarray:
        """phi' where it exists, NaN at the three kinks."""
        t = np.asarray(ts, dtype=float)
        out = np.where((t > self.a) & (t < self.x), 1.0 / self.left_width, 0.0)
        out = np.where((t > self.x) & (t < self.b), -1.0 / self.right_width, out)
        return np.where((t == self.a) | (t == self.x) | (t == self.b), np.nan, out)

    def phi_derivative_integral(self) -> Fraction:
        """Exact rational value of the integral of phi' over [a, b]."""
        left, right = Fraction(self.left_width), Fraction(self.right_width)
        return left * (1 / left) - right * (1 / right)


@dataclass(frozen=True)
class TentPerturbation:
    """psi_K: the sum of K disjoint tents."""

    tents: Tuple[Tent, ...]
    lam: float
    dim: int

    def __len__(self) -> int:
        return len(self.tents)

    @property
    def knots(self) -> np.ndarray:
        """Points where psi is not differentiable: {a_k, x_k, b_k}."""
        if not self.tents:
            return np.empty(0)
        return np.sort(np.array([[t.a, t.x, t.b] for t in self.tents]).ravel())

    @property
    def union(self) -> IntervalSet:
        return IntervalSet.from_intervals(t.interval for t in self.tents)

    @property
    def sup_norm(self) -> float:
        return max((float(np.linalg.norm(t.peak)) for t in self.tents), default=0.0)

    @property
    def slope(self) -> float:
        """s(psi): the exact maximum slope 1/lambda, or the measured one if rounding exceeds it."""
        if not self.tents:
            return 0.0
        return max(1.0 / self.lam, max(t.slope for t in self.tents))

    def values(self, ts: Sequence[float]) -> np.ndarray:
        t = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((t.size, self.dim))
        for tent in self.tents:
            out += tent.phi(t)[:, None] * tent.peak[None, :]
        return out

    def __call__(self, t: float) -> np.ndarray:
        return self.values(t)[0]

    def derivatives(self, ts: Sequence[float]) -> np.ndarray:
        t = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((t.size, self.dim))
        for tent in self.tents:
            out += tent.phi_slope(t)[:, None] * tent.peak[None, :]
        return out

    def truncated(self, count: int) -> "TentPerturbation":
        """psi_L for L <= K: the same tents on the first L intervals, zero elsewhere."""
        if not 0 <= count <= len(self.tents):
            raise PreconditionError(f"Cannot truncate {len(self.tents)} tents to {count}")
        return TentPerturbation(self.tents[:count], self.lam, self.dim)

    def as_curve(self) -> CurveC1:
        """psi as a kinked polyline curve on [0, 1]."""
        knots, positions = [0.0], [np.zeros(self.dim)]
        for tent in sorted(self.tents, key=lambda t: t.a):
            knots += [tent.a, tent.x, tent.b]
            positions += [np.zeros(self.dim), tent.peak, np.zeros(self.dim)]
        knots.append(1.0)
        positions.append(np.zeros(self.dim))
        return CurveC1.polyline(knots, positions)

    def rows(self) -> List[Tuple[int, float, float, float, float]]:
        return [(k, t.a, t.x, t.b, t.slope) for k, t in enumerate(self.tents)]


def build_tent(f: CurveC1, cover: CoverSelection, K: int) -> TentPerturbation:
    """Tents on the first K intervals of the cover, each lifting f(x_k) onto h_k."""
    if not 0 <= K <= len(cover.chosen):
        raise PreconditionError(f"K={K} exceeds the {len(cover.chosen)} intervals in the cover")
    tents = []
    for v in cover.chosen[:K]:
        lam = cover.lam or v.length / (2.0 * v.witness.d)
        peak = np.asarray(v.witness.h, dtype=float) - f(v.center)
        tents.append(Tent(v.interval.lo, v.center, v.interval.hi, peak, v.witness, lam))
    lam = cover.lam or (tents[0].lam if tents else 1.0)
    return TentPerturbation(tuple(tents), lam, f.dim)


@dataclass(frozen=True)
class HoleIntervalResult:
    R: Interval
    center: Point
    radius: float
    case: str
    ratio: float
    guarantee: float

    @property
    def length(self) -> float:
        return self.R.length


def _ball_gap_poly(coefs: np.ndarray, h: Point, r: float) -> np.ndarray:
    """||c(s) - h||^2 - r^2 as a polynomial in s."""
    diff = coefs.copy()
    diff[0] = diff[0] - h
    q = np.zeros(1)
    for j in range(diff.shape[1]):
        q = npoly.polyadd(q, npoly.polymul(diff[:, j], diff[:, j]))
    q[0] -= r * r
    return npoly.polytrim(q)


def _crossings(q: np.ndarray, width: float) -> List[float]:
    if q.size < 2:
        return []
    roots = npoly.polyroots(q)
    real = roots[np.abs(roots.imag) <= ROOT_IMAG_TOL * (1.0 + np.abs(roots.real))].real
    return sorted(set(real[(real > 0.0) & (real < width)].tolist()))


def _exit_right(F: CurveC1, h: Point, r: float, x: float, stop: float) -> Optional[float]:
    for u0, u1, c in taylor_cells(F, x, stop):
        q = _ball_gap_poly(c, h, r)
        width = u1 - u0
        pts = [0.0, *_crossings(q, width), width]
        for s0, s1 in zip(pts[:-1], pts[1:]):
            if npoly.polyval(0.5 * (s0 + s1), q) >= 0.0:
                return u0 + s0
    return None


def _exit_left(F: CurveC1, h: Point, r: float, x: float, stop: float) -> Optional[float]:
    for u0, u1, c in reversed(list(taylor_cells(F, stop, x))):
        q = _ball_gap_poly(c, h, r)
        width = u1 - u0
        pts = [width, *reversed(_crossings(q, width)), 0.0]
        for s1, s0 in zip(pts[:-1], pts[1:]):
            if npoly.polyval(0.5 * (s0 + s1), q) >= 0.0:
                return u0 + s1
    return None


def _porosity_constant(oracle: PorousSetOracle, witness: HoleWitness) -> float:
    if oracle.mode.kind == PorosityMode.C_POROUS:
        return min(oracle.mode.value, witness.ratio)
    return witness.ratio


def hole_interval(f: CurveC1, psi: TentPerturbation, k: int, oracle: PorousSetOracle, M: float,
                  perturbed: Optional[CurveC1] = None) -> HoleIntervalResult:
    """
    R_k: the component around x_k of {t : (f + psi)(t) in B(h_k, r_k)}, cut to x_k ± lambda d / 2.

    Sign changes of ||(f + psi)(t) - h||^2 - r^2 are located per polynomial piece, walking
    outwards from x_k. The guarantee |R_k| >= (Q / lambda)|I_k| with Q = c / (4M) is checked
    before returning.
    """
    if not 0 <= k < len(psi):
        raise PreconditionError(f"Tent index {k} out of range for {len(psi)} tents")
    if M <= 0:
        raise DomainError(f"Derivative cap M must be positive, got {M}")
    tent = psi.tents[k]
    F = perturbed if perturbed is not None else f + psi.as_curve()
    h, r = np.asarray(tent.witness.h, dtype=float), tent.witness.r
    half = tent.lam * tent.witness.d / 2.0
    lo_stop, hi_stop = max(tent.a, tent.x - half), min(tent.b, tent.x + half)
    right = _exit_right(F, h, r, tent.x, hi_stop)
    left = _exit_left(F, h, r, tent.x, lo_stop)
    case = CASE_FULL if right is None and left is None else CASE_BOUNDARY
    R = Interval(lo_stop if left is None else left, hi_stop if right is None else right)
    Q = _porosity_constant(oracle, tent.witness) / (4.0 * M)
    guarantee = Q / tent.lam * tent.interval.length
    ratio = R.length / tent.interval.length
    if not R.length >= guarantee:
        raise InvariantViolation("hole-interval",
                                 f"|R_{k}| = {R.length:.6g} < (Q/lambda)|I_{k}| = {guarantee:.6g} (Q={Q:.4g})")
    logger.debug(f"Hole interval {k}: |R|/|I| = {ratio:.4g} ({case}), guarantee {Q / tent.lam:.4g}")
    return HoleIntervalResult(R, h, r, case, ratio, guarantee)


@dataclass
class SmoothingResult:
    g: CurveC1
    T: IntervalSet
    rho: float
    zetas: List[float]
    holes: List[HoleIntervalResult]
    psi: TentPerturbation
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def S(self) -> IntervalSet:
        """Union of the hole intervals (as closed intervals)."""
        return IntervalSet.from_intervals(h.R for h in self.holes)


def _profile(tent: Tent, rho: float, zeta: float, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scalar smoothed profile e(t) and its derivative on [a, b]; eta = e * p."""
    a, x, b = tent.a, tent.x, tent.b
    sl, sr = 1.0 / tent.left_width, -1.0 / tent.right_width
    t = np.asarray(ts, dtype=float)
    u = t - a
    w1 = t - (a + 0.5 * rho)
    wz = t - (x - zeta)
    v = t - (b - rho)
    e_parts = [
        1.5 * sl * u * u / rho,
        sl * (0.375 * rho + 1.5 * w1 - w1 * w1 / (2.0 * rho)),
        sl * u,
        sl * (tent.left_width - zeta) + sl * wz + (sr - sl) * wz * wz / (4.0 * zeta),
        -sr * (b - t),
        -sr * (rho - v - v * v / (2.0 * rho)),
        -sr * 1.5 * (b - t) ** 2 / rho,
    ]
    d_parts = [
        3.0 * sl * u / rho,
        sl * (1.5 - w1 / rho),
        np.full_like(t, sl),
        sl + (sr - sl) * wz / (2.0 * zeta),
        np.full_like(t, sr),
        sr * (1.0 + v / rho),
        sr * 3.0 * (b - t) / rho,
    ]
    conds = [
        t <= a + 0.5 * rho,
        t <= a + rho,
        t <= x - zeta,
        t <= x + zeta,
        t <= b - rho,
        t <= b - 0.5 * rho,
        t <= b,
    ]
    outside = (t <= a) | (t >= b)
    e = np.where(outside, 0.0, np.select(conds, e_parts, 0.0))
    de = np.where(outside, 0.0, np.select(conds, d_parts, 0.0))
    return e, de


def blend_integrals(tent: Tent, rho: float, zeta: float) -> List[Tuple[float, float]]:
    """(integral of xi, integral of psi') over J_rho(a), J_zeta(x) and J_rho(b), per unit peak."""
    spans = [(tent.a, tent.a + rho), (tent.x - zeta, tent.x + zeta), (tent.b - rho, tent.b)]
    out = []
    for lo, hi in spans:
        e, _ = _profile(tent, rho, zeta, np.array([lo, hi]))
        phi = tent.phi(np.array([lo, hi]))
        out.append((float(e[1] - e[0]), float(phi[1] - phi[0])))
    return out


def smoothing_scales(f: CurveC1, psi: TentPerturbation, eps: float, theta: float,
                     holes: Sequence[HoleIntervalResult]) -> Tuple[float, List[float]]:
    """rho and zeta_k, each half of its admissible cap."""
    K, s = len(psi), psi.slope
    if theta <= psi.sup_norm:
        raise PreconditionError(f"theta={theta} does not exceed ||psi|| = {psi.sup_norm}")
    shortest = min(t.interval.length for t in psi.tents)
    rho = 0.5 * min(eps / (12 * K), (theta - psi.sup_norm) / (12 * K * s), shortest / 4.0)
    speed = sup_derivative_norm_bracket(f).upper
    zetas = []
    for tent, hole in zip(psi.tents, holes):
        margin = min(tent.x - hole.R.lo, hole.R.hi - tent.x)
        zetas.append(0.5 * min(rho, hole.radius / (12 * s), margin, hole.radius / (2.0 * (speed + s))))
    return rho, zetas


def smooth(f: CurveC1, psi: TentPerturbation, eps: float, theta: float, oracle: PorousSetOracle,
           holes: Optional[Sequence[HoleIntervalResult]] = None, M: Optional[float] = None) -> SmoothingResult:
    """
    g = f + eta, the C1 replacement of f + psi that differs from it only on T.

    On J_rho(a_k) and J_rho(b_k) the derivative blends affinely to 3/2 of the tent slope and
    back; across J_zeta(x_k) it turns over in a single affine segment. Each blend keeps the
    integral of the tent derivative, so eta = psi at the ends of every blend.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not f.is_c1:
        raise PreconditionError(f"Smoothing needs a C1 curve, found kinks at {f.kinks.tolist()}")
    if not psi.tents:
        return SmoothingResult(f, IntervalSet.empty(), 0.0, [], [], psi)
    if holes is None:
        cap = M if M is not None else max(sup_derivative_norm_bracket(f).upper, 1.0 / psi.lam)
        F = f + psi.as_curve()
        holes = [hole_interval(f, psi, k, oracle, cap, perturbed=F) for k in range(len(psi))]
    holes = list(holes)
    rho, zetas = smoothing_scales(f, psi, eps, theta, holes)

    blend_knots = set()
    for tent, zeta in zip(psi.tents, zetas):
        blend_knots.update([tent.a, tent.a + 0.5 * rho, tent.a + rho, tent.x - zeta, tent.x + zeta,
                            tent.b - rho, tent.b - 0.5 * rho, tent.b])
    # breakpoints of f that crowd a blend knot are dropped; f is C1 there
    ts = merge_knots(np.union1d(f.breakpoints, sorted(blend_knots)), keep=blend_knots)
    pos, der = f.evaluate(ts)
    for tent, zeta in zip(psi.tents, zetas):
        e, de = _profile(tent, rho, zeta, ts)
        pos = pos + e[:, None] * tent.peak[None, :]
        der = der + de[:, None] * tent.peak[None, :]
    g = CurveC1(ts, pos, der)

    T = IntervalSet.from_intervals(
        span
        for tent, zeta in zip(psi.tents, zetas)
        for span in ((tent.a, tent.a + rho), (tent.x - zeta, tent.x + zeta), (tent.b - rho, tent.b))
    )
    result = SmoothingResult(g, T, rho, zetas, holes, psi)
    result.checks = _verify_smoothing(f, result, eps, theta, oracle)
    logger.debug(f"Smoothed {len(psi)} tents: rho={rho:.3g}, |T|={T.total_length():.3g}")
    return result


def _verify_smoothing(f: CurveC1, res: SmoothingResult, eps: float, theta: float,
                      oracle: PorousSetOracle) -> Dict[str, float]:
    g, psi = res.g, res.psi
    if not g.is_c1:
        raise InvariantViolation("smoothing", f"g has kinks at {g.kinks.tolist()}")
    value, deriv = gamma1_components(g, f)
    if not value.upper < theta:
        raise InvariantViolation("smoothing", f"||g - f|| <= {value.upper:.6g} is not below theta={theta:.6g}")
    if not deriv.upper <= 2.0 * psi.slope:
        raise InvariantViolation("smoothing", f"||g' - f'|| <= {deriv.upper:.6g} exceeds 2 s(psi) = {2 * psi.slope:.6g}")
    t_len = res.T.total_length()
    if not t_len < eps:
        raise InvariantViolation("smoothing", f"|T| = {t_len:.6g} is not below eps={eps:.6g}")
    if not res.T.is_subset_of(psi.union):
        raise InvariantViolation("smoothing", "T is not contained in the tent intervals")

    grid = np.linspace(0.0, 1.0, 4097)
    g_pos, _ = g.evaluate(grid)
    f_pos, _ = f.evaluate(grid)
    scale = 1.0 + float(np.max(np.abs(f_pos)))
    off_tents = ~psi.union.mask(grid)
    drift = float(np.max(np.abs(g_pos - f_pos)[off_tents], initial=0.0))
    if drift > AGREEMENT_TOL * scale:
        raise InvariantViolation("smoothing", f"g differs from f by {drift:.3g} off the tent intervals")
    off_blends = ~res.T.mask(grid)
    target = f_pos + psi.values(grid)
    mismatch = float(np.max(np.abs(g_pos - target)[off_blends], initial=0.0))
    if mismatch > AGREEMENT_TOL * scale:
        raise InvariantViolation("smoothing", f"g differs from f + psi by {mismatch:.3g} off T")

    for k, hole in enumerate(res.holes):
        _certify_ball(g, hole, k)
    return {"sup_value": value.upper, "sup_derivative": deriv.upper, "T_length": t_len,
            "off_tent_drift": drift, "off_blend_mismatch": mismatch}


def _certify_ball(g: CurveC1, hole: HoleIntervalResult, k: int) -> None:
    """
    g maps all of R_k into the hole ball.

    A net of R_k is checked first and Lipschitz tubes then clear most of it. The cells the
    tubes leave open cluster at the ends of R_k, where g meets the sphere; each is settled
    by the sign of ||g - h||^2 - r^2 between its real roots on every polynomial piece.
    """
    R = hole.R
    net = R.lo + R.length * (np.arange(BALL_NET) + 0.5) / BALL_NET
    pos, _ = g.evaluate(net)
    dist = np.linalg.norm(pos - hole.center, axis=1)
    if not np.all(dist < hole.radius):
        worst = float(net[np.argmax(dist)])
        raise InvariantViolation("smoothing", f"g({worst:.6g}) leaves hole ball {k}")
    lip = sup_on(g, R.lo, R.hi, derivative=True).upper
    lo = R.lo + R.length * np.arange(BALL_NET) / BALL_NET
    hi = lo + R.length / BALL_NET
    for _ in range(BALL_REFINE):
        mids = 0.5 * (lo + hi)
        pos, _ = g.evaluate(mids)
        reach = np.linalg.norm(pos - hole.center, axis=1) + lip * (hi - lo) / 2.0
        open_ = reach >= hole.radius
        if not np.any(open_):
            return
        lo, hi = lo[open_], hi[open_]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    # crossings within the slack of R's ends are the sphere contacts themselves
    slack = BALL_END_SLACK * R.length
    for cell_lo, cell_hi in zip(lo.tolist(), hi.tolist()):
        for u0, u1, c in taylor_cells(g, cell_lo, cell_hi):
            q = _ball_gap_poly(c, hole.center, hole.radius)
            pts = [0.0, *_crossings(q, u1 - u0), u1 - u0]
            for s0, s1 in zip(pts[:-1], pts[1:]):
                if u0 + s1 <= R.lo + slack or u0 + s0 >= R.hi - slack:
                    continue
                if npoly.polyval(0.5 * (s0 + s1), q) >= 0.0:
                    worst = u0 + 0.5 * (s0 + s1)
                    raise InvariantViolation("smoothing", f"g({worst:.6g}) leaves hole ball {k}")
