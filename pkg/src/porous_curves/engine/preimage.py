"""
Certified estimation of the preimage measure |curve^-1(E)|.

Two strategies are used:

* exact product path: when the oracle is a cylinder F x R^(d-1), each cubic piece is
  split at the critical points of its first coordinate and the endpoints of F are
  inverted on every monotone sub-piece;
* Lipschitz bisection: otherwise each parameter cell is classified by the ball of
  radius sup||f'|| * width / 2 around the image of its midpoint, refining undecided
  cells breadth first until the undecided length fits the tolerance.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError
from .geometry import ENDPOINT_SLACK, ROOT_IMAG_TOL, CurveC1, IntervalSet, MeasureEstimate, piece_derivative_sups
from .porous import Membership, PorousSetOracle

logger = logging.getLogger(__name__)

INVERSION_STEPS = 64
EVAL_SLACK = 8.0 * np.finfo(float).eps
DEFAULT_MAX_DEPTH = 40
MAX_CELLS = 2_000_000


@dataclass(frozen=True)
class PreimageReport:
    """Certified preimage of a closed set under a curve, restricted to a window."""

    measure: MeasureEstimate
    covered: IntervalSet
    uncertain: IntervalSet
    outside: IntervalSet
    converged: bool = True
    method: str = "exact-product"

    def rows(self) -> List[Tuple[float, float, str]]:
        labelled = [(lo, hi, "inside") for lo, hi in self.covered.to_rows()]
        labelled += [(lo, hi, "uncertain") for lo, hi in self.uncertain.to_rows()]
        labelled += [(lo, hi, "outside") for lo, hi in self.outside.to_rows()]
        return sorted(labelled)


def preimage_measure(curve: CurveC1, oracle: PorousSetOracle, tol: float,
                     max_depth: int = DEFAULT_MAX_DEPTH) -> PreimageReport:
    """|curve^-1(E)| over the whole parameter interval [0, 1]."""
    return preimage_measure_on(curve, oracle, IntervalSet.unit(), tol, max_depth)


def preimage_measure_on(curve: CurveC1, oracle: PorousSetOracle, window: IntervalSet, tol: float,
                        max_depth: int = DEFAULT_MAX_DEPTH) -> PreimageReport:
    """|curve^-1(E) ∩ window| with the same certification contract as the full measure."""
    if tol <= 0:
        raise DomainError(f"Tolerance must be positive, got {tol}")
    if curve.dim != oracle.ambient_dim:
        raise DomainError(f"Curve dimension {curve.dim} differs from oracle dimension {oracle.ambient_dim}")
    window = window.clip(0.0, 1.0)
    if window.is_empty or oracle.is_empty:
        return PreimageReport(MeasureEstimate(0.0, 0.0), IntervalSet.empty(), IntervalSet.empty(), window)
    base = oracle.first_coordinate_set
    if base is not None:
        return _exact_product(curve, base, window)
    return _bisection(curve, oracle, window, tol, max_depth)


def _critical_points(coefs: np.ndarray, width: float) -> np.ndarray:
    deriv = npoly.polytrim(np.array([coefs[1], 2.0 * coefs[2], 3.0 * coefs[3]]))
    if deriv.size < 2 or not np.any(deriv):
        return np.empty(0)
    roots = npoly.polyroots(deriv)
    real = roots[np.abs(roots.imag) <= ROOT_IMAG_TOL * (1.0 + np.abs(roots.real))].real
    return np.unique(real[(real > 0.0) & (real < width)])


def _invert(coefs: np.ndarray, sa: float, sb: float, targets: np.ndarray, increasing: bool) -> np.ndarray:
    """Parameters s in [sa, sb] with x(s) = target for a monotone cubic x."""
    lo = np.full(targets.shape, sa)
    hi = np.full(targets.shape, sb)
    for _ in range(INVERSION_STEPS):
        mid = 0.5 * (lo + hi)
        val = npoly.polyval(mid, coefs)
        go_right = val < targets if increasing else val > targets
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def _exact_product(curve: CurveC1, base: IntervalSet, window: IntervalSet) -> PreimageReport:
    params_lo: List[np.ndarray] = []
    params_hi: List[np.ndarray] = []
    endpoint_err: List[np.ndarray] = []
    endpoint_at: List[np.ndarray] = []
    widths = np.diff(curve.breakpoints)
    for i in range(curve.pieces):
        coefs = curve.coefficients[i][:, 0]
        t0, width = float(curve.breakpoints[i]), float(widths[i])
        cuts = np.concatenate([[0.0], _critical_points(coefs, width), [width]])
        scale = float(np.sum(np.abs(coefs) * width ** np.arange(4)))
        for sa, sb in zip(cuts[:-1].tolist(), cuts[1:].tolist()):
            xa = curve.positions[i, 0] if sa == 0.0 else float(npoly.polyval(sa, coefs))
            xb = curve.positions[i + 1, 0] if sb == width else float(npoly.polyval(sb, coefs))
            if xa == xb:
                if base.contains(xa, slack=ENDPOINT_SLACK):
                    params_lo.append(np.array([t0 + sa]))
                    params_hi.append(np.array([t0 + sb]))
                continue
            increasing = xb > xa
            xmin, xmax = (xa, xb) if increasing else (xb, xa)
            hit = base.clip(xmin, xmax)
            if hit.is_empty:
                continue
            targets = np.concatenate([hit.lo, hit.hi])
            s = _invert(coefs, sa, sb, targets, increasing)
            s_min, s_max = (sa, sb) if increasing else (sb, sa)
            s = np.where(targets <= xmin, s_min, np.where(targets >= xmax, s_max, s))
            slope = np.abs(npoly.polyval(s, npoly.polyder(coefs)))
            with np.errstate(divide="ignore"):
                err = np.minimum(sb - sa, EVAL_SLACK * scale / slope + (sb - sa) * 2.0 ** -INVERSION_STEPS)
            err = np.where((targets <= xmin) | (targets >= xmax), 0.0, err)
            n = hit.lo.size
            first, second = s[:n], s[n:]
            if not increasing:
                first, second = second, first
            params_lo.append(t0 + first)
            params_hi.append(t0 + second)
            endpoint_err.append(err)
            endpoint_at.append(t0 + s)
    if params_lo:
        covered = IntervalSet(np.concatenate(params_lo), np.concatenate(params_hi))
    else:
        covered = IntervalSet.empty()
    covered = covered & window
    error = 0.0
    if endpoint_err:
        errs, where = np.concatenate(endpoint_err), np.concatenate(endpoint_at)
        slot = np.searchsorted(window.lo, where + errs, side="right") - 1
        inside_window = (slot >= 0) & (where <= window.hi[np.maximum(slot, 0)] + errs)
        error = math.fsum(errs[inside_window].tolist())
    value = covered.total_length()
    logger.debug(f"Exact product preimage: {len(covered)} intervals, measure {value:.12g} ± {error:.3g}")
    return PreimageReport(
        measure=MeasureEstimate(value, error),
        covered=covered,
        uncertain=IntervalSet.empty(),
        outside=window - covered,
        converged=True,
        method="exact-product",
    )


def _bisection(curve: CurveC1, oracle: PorousSetOracle, window: IntervalSet, tol: float,
               max_depth: int) -> PreimageReport:
    lips = np.array([b.upper for b in piece_derivative_sups(curve)])
    cells_lo, cells_hi, cells_piece = [], [], []
    for iv in window:
        knots = curve.breakpoints[(curve.breakpoints > iv.lo) & (curve.breakpoints < iv.hi)]
        edges = np.concatenate([[iv.lo], knots, [iv.hi]])
        for a, b in zip(edges[:-1].tolist(), edges[1:].tolist()):
            cells_lo.append(a)
            cells_hi.append(b)
            cells_piece.append(curve.piece_index(a))
    lo, hi, piece = np.array(cells_lo), np.array(cells_hi), np.array(cells_piece, dtype=int)
    inside_lo, inside_hi, out_lo, out_hi = [], [], [], []
    depth, processed = 0, 0
    while lo.size:
        mids = 0.5 * (lo + hi)
        centres, _ = curve.evaluate(mids)
        radii = lips[piece] * (hi - lo) / 2.0
        radii = radii * (1.0 + 1e-12) + 1e-15
        labels = [oracle.classify_ball(c, r) for c, r in zip(centres, radii.tolist())]
        is_in = np.array([lab == Membership.INSIDE for lab in labels], dtype=bool)
        is_out = np.array([lab == Membership.OUTSIDE for lab in labels], dtype=bool)
        inside_lo.append(lo[is_in])
        inside_hi.append(hi[is_in])
        out_lo.append(lo[is_out])
        out_hi.append(hi[is_out])
        pending = ~(is_in | is_out)
        lo, hi, piece = lo[pending], hi[pending], piece[pending]
        processed += pending.size
        undecided = math.fsum((hi - lo).tolist())
        if undecided / 2.0 <= tol or depth >= max_depth or processed >= MAX_CELLS:
            break
        mid = 0.5 * (lo + hi)
        lo, hi, piece = np.concatenate([lo, mid]), np.concatenate([mid, hi]), np.concatenate([piece, piece])
        depth += 1
    covered = IntervalSet(np.concatenate(inside_lo), np.concatenate(inside_hi))
    uncertain = IntervalSet(lo, hi)
    outside = IntervalSet(np.concatenate(out_lo), np.concatenate(out_hi))
    half = uncertain.total_length() / 2.0
    converged = half <= tol
    if not converged:
        logger.warning(f"Preimage bisection stopped at depth {depth} with error {half:.3g} > tol {tol:.3g}")
    return PreimageReport(
        measure=MeasureEstimate(covered.total_length() + half, half),
        covered=covered,
        uncertain=uncertain,
        outside=outside,
        converged=converged,
        method="bisection",
    )
