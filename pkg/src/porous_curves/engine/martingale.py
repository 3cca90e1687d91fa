"""
Piecewise-constant vector fields and the martingale checks on tent derivatives.

Each pass contributes the derivative of its surviving tents as one increment. The
partial sums form a martingale on [0, 1] with Lebesgue measure, which the
diagnostics verify directly: increments are orthogonal, second moments add up,
and the maximal exceedance obeys the Kolmogorov bound.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple

import numpy as np

from .errors import DomainError, PreconditionError
from .perturbation import TentPerturbation

if TYPE_CHECKING:
    from .avoidance import PassState

logger = logging.getLogger(__name__)

PAIRWISE_TOL = 1e-12
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class StepField:
    """A map [0, 1] -> R^d that is constant on each cell [breakpoints[i], breakpoints[i+1])."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise DomainError("Step field breakpoints must increase strictly from 0 to 1")
        if vals.ndim != 2 or vals.shape[0] != bp.size - 1:
            raise DomainError(f"Expected {bp.size - 1} cell values, got shape {vals.shape}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, dim: int) -> "StepField":
        return cls(np.array([0.0, 1.0]), np.zeros((1, dim)))

    @classmethod
    def from_tents(cls, psi: TentPerturbation) -> "StepField":
        """psi' as a step field; the kinks themselves are a null set."""
        knots, values = [0.0], []
        zero = np.zeros(psi.dim)
        for tent in sorted(psi.tents, key=lambda t: t.a):
            knots += [tent.a, tent.x, tent.b]
            values += [zero, tent.peak / tent.left_width, -tent.peak / tent.right_width]
        knots.append(1.0)
        values.append(zero)
        return cls(np.array(knots), np.array(values))

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def on(self, knots: np.ndarray) -> np.ndarray:
        """Cell values on a finer grid containing every breakpoint of this field."""
        idx = np.searchsorted(self.breakpoints, knots[:-1], side="right") - 1
        return self.values[idx]

    def __add__(self, other: "StepField") -> "StepField":
        knots = np.union1d(self.breakpoints, other.breakpoints)
        return StepField(knots, self.on(knots) + other.on(knots))

    def __call__(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(max(i, 0), self.values.shape[0] - 1)]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.norms()))

    def inner_integral(self, other: "StepField") -> float:
        """Exact integral of <self, other> over [0, 1]."""
        knots = np.union1d(self.breakpoints, other.breakpoints)
        products = np.einsum("ij,ij->i", self.on(knots), other.on(knots)) * np.diff(knots)
        return math.fsum(products.tolist())

    def second_moment(self) -> float:
        return self.inner_integral(self)


def running_max_norm(increments: Sequence[StepField]) -> Tuple[np.ndarray, np.ndarray]:
    """Breakpoints and per-cell values of max_n ||sum_{i<=n} increments_i||."""
    knots = np.array([0.0, 1.0])
    for inc in increments:
        knots = np.union1d(knots, inc.breakpoints)
    stacked = np.stack([inc.on(knots) for inc in increments])
    partial = np.cumsum(stacked, axis=0)
    return knots, np.max(np.linalg.norm(partial, axis=2), axis=0)


@dataclass
class MartingaleReport:
    rounds: int
    lam: float
    kappa: float
    second_moment: float
    moment_sum: float
    increment_moments: List[float]
    exceedance_measure: float
    pairwise: Dict[Tuple[int, int], float] = field(default_factory=dict)
    histogram: List[Tuple[float, float, float]] = field(default_factory=list)
    per_round: List[Tuple[int, float, float, float, float]] = field(default_factory=list)

    @property
    def bound(self) -> float:
        return self.rounds / self.lam ** 2

    @property
    def kolmogorov_bound(self) -> float:
        return self.second_moment / self.kappa ** 2

    @property
    def max_pairwise(self) -> float:
        return max((abs(v) for v in self.pairwise.values()), default=0.0)

    @property
    def orthogonal(self) -> bool:
        return self.max_pairwise <= PAIRWISE_TOL

    @property
    def passed(self) -> bool:
        return (self.orthogonal
                and self.second_moment <= self.bound
                and self.exceedance_measure <= self.kolmogorov_bound)

    def rows(self) -> List[Tuple[int, int, float]]:
        return [(n, p, value) for (n, p), value in sorted(self.pairwise.items())]

    def round_rows(self) -> List[Tuple[int, float, float, float, float]]:
        """(n, E||X_n||^2, (n-1)/lambda^2, sup||X_n||, |{||X_n|| >= kappa}|) for n = 1..N."""
        return list(self.per_round)

    def summary(self) -> Dict[str, float]:
        return {
            "rounds": self.rounds,
            "second_moment": self.second_moment,
            "moment_sum": self.moment_sum,
            "bound": self.bound,
            "kappa": self.kappa,
            "exceedance_measure": self.exceedance_measure,
            "kolmogorov_bound": self.kolmogorov_bound,
            "max_pairwise": self.max_pairwise,
        }


def diagnose_increments(increments: Sequence[StepField], lam: float, kappa: float,
                        bins: int = HISTOGRAM_BINS) -> MartingaleReport:
    if not increments:
        raise PreconditionError("Martingale diagnostics need at least one completed pass")
    if kappa <= 0:
        raise DomainError(f"Exceedance threshold must be positive, got {kappa}")
    pairwise = {}
    for n in range(len(increments)):
        for p in range(n):
            pairwise[(n + 1, p + 1)] = increments[n].inner_integral(increments[p])
    total = increments[0]
    for inc in increments[1:]:
        total = total + inc
    moments = [inc.second_moment() for inc in increments]
    knots, peak = running_max_norm(increments)
    widths = np.diff(knots)
    exceed = math.fsum(widths[peak >= kappa].tolist())
    top = max(float(np.max(peak)), kappa)
    mass, edges = np.histogram(peak, bins=bins, range=(0.0, top), weights=widths)
    histogram = [(float(lo), float(hi), float(m)) for lo, hi, m in zip(edges[:-1], edges[1:], mass)]
    # X_n sums the increments of the passes before round n, so X_1 = 0
    per_round = []
    partial = StepField.zero(increments[0].dim)
    for n in range(1, len(increments) + 1):
        cell_norms = partial.norms()
        beyond = math.fsum(partial.widths[cell_norms >= kappa].tolist())
        per_round.append((n, partial.second_moment(), (n - 1) / lam ** 2, partial.sup_norm, beyond))
        partial = partial + increments[n - 1]
    report = MartingaleReport(
        rounds=len(increments),
        lam=lam,
        kappa=kappa,
        second_moment=total.second_moment(),
        moment_sum=math.fsum(moments),
        increment_moments=moments,
        exceedance_measure=exceed,
        pairwise=pairwise,
        histogram=histogram,
        per_round=per_round,
    )
    if not report.passed:
        logger.warning(f"Martingale checks failed: {report.summary()}")
    return report


def martingale_diagnostics(state: "PassState") -> MartingaleReport:
    """Checks on X_N built from the tent derivatives of every completed pass."""
    params = state.params
    kappa = params.sigma / 8.0 - 1.0 / params.lam
    return diagnose_increments(state.increments, params.lam, kappa)
