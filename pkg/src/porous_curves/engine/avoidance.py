"""
The measure-reduction engine: parameters, passes, audits and iteration schedules.

One pass takes the current curve f_n, covers the part of f_n^-1(E) not yet settled by
disjoint Vitali intervals, lifts f_n into a hole on each interval with a tent, drops
tents whose accumulated derivative drift is too large, smooths the result into g_n
and settles the parameters it can no longer change (F_n). The next curve is then chosen
by an adversary anywhere in a small ball around g_n.

Every pass re-verifies the guarantees it depends on and appends an audit row; the
bound on the remaining measure is tracked next to the measured value.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InvariantViolation, ParameterError, PreconditionError
from .geometry import (CurveC1, IntervalSet, MeasureEstimate, gamma1_components, gamma1_distance_bracket,
                       sup_derivative_norm_bracket, sup_norm_bracket, sup_on)
from .martingale import StepField
from .perturbation import HoleIntervalResult, SmoothingResult, TentPerturbation, build_tent, hole_interval, smooth
from .porous import PorousSetOracle
from .preimage import DEFAULT_MAX_DEPTH, preimage_measure, preimage_measure_on
from .vitali import CoverSelection, select_disjoint_cover, truncate_cover

logger = logging.getLogger(__name__)

PAPER_STRICT = "paper-strict"
DESK_RELAXED = "desk-relaxed"
MODES = (PAPER_STRICT, DESK_RELAXED)

DESK_LAMBDA_LIMIT = 1e4
DESK_ROUND_LIMIT = 1000
DEFAULT_ROUND_CAP = 50
PARTITION_TOL = 1e-9
DELTA_HALVINGS = 60
STRICT_SEARCH_LIMIT = 1e15
RESCALE_ATTEMPTS = 4

AUDIT_COLUMNS = ("round", "measure", "measure_error", "covered_len", "hole_len", "C_len", "T_len",
                 "delta", "theta", "bound_rhs")


def strict_round_count(lam: float, sigma: float, eps: float) -> int:
    """N = floor(lambda^2 (sigma/8 - 1/lambda)^2 eps)."""
    return int(math.floor(lam * lam * (sigma / 8.0 - 1.0 / lam) ** 2 * eps))


def strict_condition(lam: float, sigma: float, eps: float, Q: float) -> float:
    """(eps lambda^2 kappa^2 - 1) log(1 - Q/lambda) + log 4; negative when the round count suffices."""
    kappa = sigma / 8.0 - 1.0 / lam
    return (eps * lam * lam * kappa * kappa - 1.0) * math.log1p(-Q / lam) + math.log(4.0)


@dataclass(frozen=True)
class EngineParams:
    sigma: float
    M: float
    lam: float
    N: int
    eps: float
    Q: float
    c: float
    mode: str = DESK_RELAXED
    strict_gate: bool = False
    feasible: bool = True
    tol: float = 1e-9
    max_depth: int = DEFAULT_MAX_DEPTH

    @property
    def kappa(self) -> float:
        return self.sigma / 8.0 - 1.0 / self.lam

    @property
    def shrink(self) -> float:
        """Guaranteed per-round factor 1 - Q/lambda."""
        return 1.0 - self.Q / self.lam

    def strict_margin(self) -> float:
        return strict_condition(self.lam, self.sigma, self.eps, self.Q)

    def rebased(self, f1: CurveC1, sigma: Optional[float] = None) -> "EngineParams":
        """Same tent scale and budget around a new centre curve."""
        sigma = self.sigma if sigma is None else sigma
        if not self.lam > 12.0 / sigma:
            raise ParameterError(f"lambda={self.lam} must exceed 12/sigma = {12.0 / sigma:.6g}")
        M = sup_derivative_norm_bracket(f1).upper + sigma
        return replace(self, sigma=sigma, M=M, Q=self.c / (4.0 * M))

    def as_dict(self) -> Dict[str, object]:
        return {
            "sigma": self.sigma, "M": self.M, "lambda": self.lam, "N": self.N, "eps": self.eps,
            "Q": self.Q, "c": self.c, "mode": self.mode, "strict_gate": self.strict_gate,
            "feasible": self.feasible, "kappa": self.kappa,
        }


def derive_params(f1: CurveC1, sigma: float, eps: float, c: float, mode: str = DESK_RELAXED,
                  lam: Optional[float] = None, rounds: Optional[int] = None,
                  initial_measure: Optional[float] = None, tol: float = 1e-9,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> EngineParams:
    """
    Engine parameters around f1.

    paper-strict searches the smallest lambda for which N = floor(lambda^2 kappa^2 eps) rounds
    of guaranteed shrinkage reach a quarter, and flags the result as infeasible when it is far
    beyond desk scale. desk-relaxed takes lambda and the round cap from the caller.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not 0 < c < 1:
        raise DomainError(f"Porosity constant must lie in (0, 1), got {c}")
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if mode not in MODES:
        raise DomainError(f"Unknown mode: {mode}")
    M = sup_derivative_norm_bracket(f1).upper + sigma
    Q = c / (4.0 * M)

    if mode == DESK_RELAXED:
        if lam is None:
            raise ParameterError("desk-relaxed mode needs an explicit lambda")
        if not lam > 12.0 / sigma:
            raise ParameterError(f"lambda={lam} must exceed 12/sigma = {12.0 / sigma:.6g}")
        cap = DEFAULT_ROUND_CAP if rounds is None else int(rounds)
        if cap < 1:
            raise ParameterError(f"Round cap must be at least 1, got {cap}")
        return EngineParams(sigma, M, float(lam), cap, eps, Q, c, DESK_RELAXED, False, True, tol, max_depth)

    if initial_measure is not None and not eps < initial_measure / 72.0:
        raise ParameterError(f"eps={eps} violates eps < |f1^-1(E)|/72 = {initial_measure / 72.0:.6g}")
    lo = 12.0 / sigma * (1.0 + 1e-12)
    hi = lo
    while strict_condition(hi, sigma, eps, Q) >= 0.0:
        hi *= 2.0
        if hi > STRICT_SEARCH_LIMIT:
            raise ParameterError(f"No lambda below {STRICT_SEARCH_LIMIT:.0e} satisfies the round-count inequality")
    if hi > lo:
        lo = hi / 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if strict_condition(mid, sigma, eps, Q) < 0.0:
                hi = mid
            else:
                lo = mid
    N = strict_round_count(hi, sigma, eps)
    feasible = hi <= DESK_LAMBDA_LIMIT and N <= DESK_ROUND_LIMIT
    if not feasible:
        logger.warning(f"Strict parameters are beyond desk scale: lambda ≈ {hi:.4g}, N ≈ {N:.4g}")
    return EngineParams(sigma, M, hi, N, eps, Q, c, PAPER_STRICT, True, feasible, tol, max_depth)


@dataclass(frozen=True)
class AuditRow:
    round: int
    measure: float
    measure_error: float
    covered_len: float
    hole_len: float
    C_len: float
    T_len: float
    delta: float
    theta: float
    bound_rhs: float
    residue: float = 0.0
    tents: int = 0
    survivors: int = 0
    remaining: float = 0.0

    def as_row(self) -> Tuple:
        return tuple(getattr(self, name) for name in AUDIT_COLUMNS)


@dataclass
class PassRecord:
    """What one pass built, kept for reports and interval plots."""

    n: int
    cover: CoverSelection
    flagged: List[int]
    psi: TentPerturbation
    holes: List[HoleIntervalResult]
    smoothing: SmoothingResult
    S: IntervalSet
    A: IntervalSet
    F: IntervalSet
    C: IntervalSet
    delta_growth: float

    def interval_rows(self) -> List[Tuple[int, str, float, float]]:
        rows = [(self.n, "cover", v.interval.lo, v.interval.hi) for v in self.cover.chosen]
        rows += [(self.n, "hole", lo, hi) for lo, hi in self.S.to_rows()]
        rows += [(self.n, "T", lo, hi) for lo, hi in self.smoothing.T.to_rows()]
        rows += [(self.n, "C", lo, hi) for lo, hi in self.C.to_rows()]
        rows += [(self.n, "F", lo, hi) for lo, hi in self.F.to_rows()]
        return rows


@dataclass
class PassState:
    """State after n - 1 completed passes; f is the curve the next pass starts from."""

    params: EngineParams
    f1: CurveC1
    f: CurveC1
    n: int = 1
    g: Optional[CurveC1] = None
    F_sets: List[IntervalSet] = field(default_factory=list)
    C_sets: List[IntervalSet] = field(default_factory=list)
    residues: List[float] = field(default_factory=list)
    remaining: IntervalSet = field(default_factory=IntervalSet.unit)
    delta: float = 0.0
    theta: float = 0.0
    increments: List[StepField] = field(default_factory=list)
    audit: List[AuditRow] = field(default_factory=list)
    records: List[PassRecord] = field(default_factory=list)
    initial_measure: MeasureEstimate = MeasureEstimate(0.0, 0.0)
    seed: int = 0

    @property
    def rounds(self) -> int:
        return self.n - 1

    @property
    def F_union(self) -> IntervalSet:
        union = IntervalSet.empty()
        for F in self.F_sets:
            union = union | F
        return union

    @property
    def current_measure(self) -> MeasureEstimate:
        row = self.audit[-1]
        return MeasureEstimate(row.measure, row.measure_error)

    @property
    def X(self) -> StepField:
        """X_n = sum of the tent derivatives of the completed passes."""
        total = StepField.zero(self.f.dim)
        for inc in self.increments:
            total = total + inc
        return total

    def audit_rows(self) -> List[Tuple]:
        return [row.as_row() for row in self.audit]

    def interval_rows(self) -> List[Tuple[int, str, float, float]]:
        return [row for record in self.records for row in record.interval_rows()]


def _measure(curve: CurveC1, oracle: PorousSetOracle, params: EngineParams,
             window: Optional[IntervalSet] = None) -> MeasureEstimate:
    if window is None:
        return preimage_measure(curve, oracle, params.tol, params.max_depth).measure
    return preimage_measure_on(curve, oracle, window, params.tol, params.max_depth).measure


def bound_rhs(state: PassState) -> float:
    """
    Right-hand side of the aggregate bound after the completed passes.

    shrink^n |f1^-1(E)| + sum |C_i| + 8 eps (1 - 2^-n) + sum of the cover residues. The
    unsettled parameters lose a share Q / lambda of every selected interval each pass, the
    settled windows carry their own bounds, and neither depends on the adversary.
    """
    params = state.params
    rounds = state.rounds
    guaranteed = params.shrink ** rounds * state.initial_measure.upper
    stopped = math.fsum(C.total_length() for C in state.C_sets)
    return guaranteed + stopped + 8.0 * params.eps * (1.0 - 0.5 ** rounds) + math.fsum(state.residues)


def initial_state(f1: CurveC1, params: EngineParams, oracle: PorousSetOracle, seed: int = 0) -> PassState:
    measure = _measure(f1, oracle, params)
    state = PassState(params=params, f1=f1, f=f1, delta=params.sigma, initial_measure=measure, seed=seed)
    row = AuditRow(0, measure.value, measure.error_bound, 0.0, 0.0, 0.0, 0.0, params.sigma, 0.0,
                   measure.upper, remaining=1.0)
    state.audit.append(row)
    return state


# adversaries

class Adversary:
    """Chooses f_{n+1} inside the ball B(g_n, delta_n)."""

    name = "adversary"

    def __call__(self, g: CurveC1, delta: float, oracle: PorousSetOracle, rng: np.random.Generator,
                 params: EngineParams) -> CurveC1:
        raise NotImplementedError


class StayAdversary(Adversary):
    name = "stay"

    def __call__(self, g, delta, oracle, rng, params):
        return g


class WorstSampledAdversary(Adversary):
    """Keeps the sampled neighbour of g_n with the largest preimage measure."""

    name = "worst-sampled"

    def __init__(self, samples: int = 8, reach: float = 0.9):
        if samples < 1:
            raise DomainError(f"Need at least one sample, got {samples}")
        self.samples = samples
        self.reach = reach

    def _candidate(self, g: CurveC1, delta: float, rng: np.random.Generator, j: int) -> CurveC1:
        direction = rng.normal(size=g.dim)
        direction /= np.linalg.norm(direction)
        if j % 2 == 0:
            bump = CurveC1.line(direction, np.zeros(g.dim))
        else:
            k = int(rng.integers(1, 4))
            bump = CurveC1.sample_hermite(
                lambda t: np.outer(np.sin(math.pi * k * t), direction),
                lambda t: np.outer(math.pi * k * np.cos(math.pi * k * t), direction),
                pieces=16,
            )
        size = sup_norm_bracket(bump).upper + sup_derivative_norm_bracket(bump).upper
        factor = self.reach * delta / size
        # the sum is re-interpolated on merged knots, so its distance from g is measured
        for _ in range(RESCALE_ATTEMPTS):
            candidate = g + bump.scaled(factor)
            if gamma1_distance_bracket(candidate, g).upper < self.reach * delta:
                return candidate
            factor /= 2.0
        return g

    def __call__(self, g, delta, oracle, rng, params):
        best, best_measure = g, _measure(g, oracle, params).upper
        for j in range(self.samples):
            candidate = self._candidate(g, delta, rng, j)
            measure = _measure(candidate, oracle, params).upper
            if measure > best_measure:
                best, best_measure = candidate, measure
        return best


class CustomAdversary(Adversary):
    name = "custom"

    def __init__(self, func: Callable[[CurveC1, float, np.random.Generator], CurveC1]):
        self.func = func

    def __call__(self, g, delta, oracle, rng, params):
        return self.func(g, delta, rng)


def make_adversary(name: str, samples: int = 8,
                   func: Optional[Callable[[CurveC1, float, np.random.Generator], CurveC1]] = None) -> Adversary:
    if name == "stay":
        return StayAdversary()
    elif name == "worst-sampled":
        return WorstSampledAdversary(samples)
    elif name == "custom":
        if func is None:
            raise DomainError("The custom adversary needs a callable")
        return CustomAdversary(func)
    else:
        raise DomainError(f"Unknown adversary: {name}")


# one pass

@dataclass
class StoppingResult:
    C: IntervalSet
    L: int
    psi: TentPerturbation
    flagged: List[int]


def stopping_set(f_n: CurveC1, psi_tilde: TentPerturbation, f1: CurveC1, sigma: float) -> StoppingResult:
    """Drop every tent interval on which ||f_n' + psi' - f1'|| can reach sigma/4."""
    if not psi_tilde.tents:
        return StoppingResult(IntervalSet.empty(), 0, psi_tilde, [])
    drift = f_n + psi_tilde.as_curve() - f1
    flagged, kept = [], []
    for k, tent in enumerate(psi_tilde.tents):
        if sup_on(drift, tent.a, tent.b, derivative=True).upper >= sigma / 4.0:
            flagged.append(k)
        else:
            kept.append(tent)
    C = IntervalSet.from_intervals(psi_tilde.tents[k].interval for k in flagged)
    survivors = TentPerturbation(tuple(kept), psi_tilde.lam, psi_tilde.dim)
    if flagged:
        logger.debug(f"Stopping set: {len(flagged)} of {len(psi_tilde)} intervals flagged, |C| = {C.total_length():.3g}")
    return StoppingResult(C, len(kept), survivors, flagged)


def choose_delta(g: CurveC1, oracle: PorousSetOracle, window: IntervalSet, cap: float, allowance: float,
                 params: EngineParams) -> Tuple[float, float]:
    """Largest delta = cap / 2^j (j >= 1) whose 2*delta-inflated preimage on the window grows by <= allowance."""
    base = _measure(g, oracle, params, window).upper
    delta = cap / 2.0
    for _ in range(DELTA_HALVINGS):
        grown = _measure(g, oracle.inflated(2.0 * delta), params, window).upper
        if grown - base <= allowance:
            return delta, grown - base
        delta /= 2.0
    raise InvariantViolation("step-9", f"No delta below {cap:.3g} keeps the preimage growth under {allowance:.3g}")


def run_pass(state: PassState, params: EngineParams, oracle: PorousSetOracle,
             adversary: Optional[Adversary] = None) -> PassState:
    """One round: theta, cover, tents, stopping set, holes, smoothing, bookkeeping, delta, next curve."""
    adversary = adversary or StayAdversary()
    n, f, f1, sigma = state.n, state.f, state.f1, params.sigma
    eps_n = params.eps / 2.0 ** n

    # step 1: tent height cap
    drift = gamma1_components(f, f1)[0].upper
    theta = 0.5 * (sigma / 4.0 - drift)
    if not theta > 0.0:
        raise InvariantViolation("step-1", f"||f_{n} - f_1|| = {drift:.6g} leaves no room below sigma/4")

    # steps 2-3: disjoint cover of the unsettled preimage, truncated to K intervals, and tents
    exclude = state.F_union
    selection = select_disjoint_cover(f, oracle, params.lam, theta, exclude, eps_n / 2.0,
                                      seed=state.seed + n, tol=params.tol)
    head, K = truncate_cover(selection, eps_n / 2.0)
    psi_tilde = build_tent(f, head, K)

    # steps 4-5: stopping set and relabelled survivors
    stop = stopping_set(f, psi_tilde, f1, sigma)
    psi = stop.psi

    # step 6: hole intervals
    perturbed = f + psi.as_curve()
    holes = [hole_interval(f, psi, k, oracle, params.M, perturbed=perturbed) for k in range(len(psi))]

    # step 7: smoothing
    smoothing = smooth(f, psi, eps_n, theta, oracle, holes=holes)
    g, T = smoothing.g, smoothing.T
    value, deriv = gamma1_components(g, f1)
    if not value.upper < sigma / 4.0:
        raise InvariantViolation("step-7", f"||g_{n} - f_1|| <= {value.upper:.6g} is not below sigma/4")
    if value.lower + deriv.lower >= sigma:
        raise InvariantViolation("step-7", f"g_{n} left the ball B(f_1, {sigma})")
    kept = psi.union
    if len(psi):
        on_tents = _measure(g, oracle, params, kept)
        allowed = math.fsum(t.interval.length - h.guarantee for t, h in zip(psi.tents, holes)) + T.total_length()
        if on_tents.lower > allowed:
            raise InvariantViolation("step-7", f"|g_{n}^-1(E) on the tents| = {on_tents.lower:.6g} > {allowed:.6g}")

    # step 8: settled parameters
    S = smoothing.S
    A = (head.union | stop.C | exclude).complement(0.0, 1.0)
    F_new = S | A | T | stop.C
    remaining = kept - (S | T)
    covered = (exclude | F_new | remaining).total_length()
    if abs(covered - 1.0) > PARTITION_TOL:
        raise InvariantViolation("step-8", f"Settled and remaining parameters cover {covered:.12g}, not 1")

    # step 9: delta
    cap = min(state.delta / 2.0, sigma / 2.0 ** (n + 3))
    delta, growth = choose_delta(g, oracle, S | A, cap, eps_n / 2.0, params)

    # step 10: next curve
    rng = np.random.default_rng([state.seed, n])
    f_next = adversary(g, delta, oracle, rng, params)
    gap = gamma1_distance_bracket(f_next, g).upper
    if not (f_next is g or gap < delta):
        if isinstance(adversary, CustomAdversary):
            raise PreconditionError(f"Custom adversary moved {gap:.3g} from g_{n}, outside delta={delta:.3g}")
        raise InvariantViolation("step-10", f"Adversary {adversary.name} moved {gap:.3g} >= delta={delta:.3g}")

    increment = StepField.from_tents(psi)
    if increment.sup_norm > (1.0 + 1e-9) * psi.slope:
        raise InvariantViolation("martingale", f"Increment norm {increment.sup_norm:.6g} exceeds s(psi)")

    residue = max(0.0, head.uncovered_bound - eps_n)
    record = PassRecord(n, head, stop.flagged, psi, holes, smoothing, S, A, F_new, stop.C, growth)
    new_state = replace(
        state,
        n=n + 1,
        f=f_next,
        g=g,
        F_sets=state.F_sets + [F_new],
        C_sets=state.C_sets + [stop.C],
        residues=state.residues + [residue],
        remaining=remaining,
        delta=delta,
        theta=theta,
        increments=state.increments + [increment],
        audit=list(state.audit),
        records=state.records + [record],
    )
    measure = _measure(f_next, oracle, params)
    row = AuditRow(
        round=n,
        measure=measure.value,
        measure_error=measure.error_bound,
        covered_len=head.total_length,
        hole_len=math.fsum(h.length for h in holes),
        C_len=stop.C.total_length(),
        T_len=T.total_length(),
        delta=delta,
        theta=theta,
        bound_rhs=bound_rhs(new_state),
        residue=residue,
        tents=K,
        survivors=stop.L,
        remaining=remaining.total_length(),
    )
    new_state.audit.append(row)
    logger.debug(f"Round {n}: measure {measure.value:.6g}, {K} tents ({stop.L} kept), "
                 f"delta {delta:.3g}, bound {row.bound_rhs:.6g}")
    return new_state


# audits

@dataclass(frozen=True)
class AuditCheck:
    name: str
    measured: float
    bound: float
    passed: bool
    hard: bool = True


@dataclass
class AuditReport:
    round: int
    checks: List[AuditCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.hard)

    def failures(self) -> List[AuditCheck]:
        return [check for check in self.checks if not check.passed]

    def rows(self) -> List[Tuple[int, str, float, float, bool]]:
        return [(self.round, c.name, c.measured, c.bound, c.passed) for c in self.checks]


def audit_measure_bounds(state: PassState, oracle: PorousSetOracle, strict: bool = True) -> AuditReport:
    """
    Windowed, aggregate, stopping-set and partition checks on the current curve.

    The stopping-set total is a hard check only when the strict gate is on; in desk-relaxed
    mode it is reported.
    """
    params, f = state.params, state.f
    checks = []
    for m, (F, C, residue) in enumerate(zip(state.F_sets, state.C_sets, state.residues), start=1):
        measured = _measure(f, oracle, params, F).lower
        bound = C.total_length() + 7.0 * params.eps / 2.0 ** m + residue
        checks.append(AuditCheck(f"window-{m}", measured, bound, measured <= bound))
    total = _measure(f, oracle, params).lower
    rhs = bound_rhs(state)
    checks.append(AuditCheck("aggregate", total, rhs, total <= rhs))
    stopped = math.fsum(C.total_length() for C in state.C_sets)
    checks.append(AuditCheck("stopping-sets", stopped, 2.0 * params.eps, stopped < 2.0 * params.eps,
                             hard=params.strict_gate))
    covered = (state.F_union | state.remaining).total_length()
    checks.append(AuditCheck("partition", covered, 1.0, abs(covered - 1.0) <= PARTITION_TOL))
    report = AuditReport(state.rounds, checks)
    if strict and not report.passed:
        failed = ", ".join(f"{c.name}: {c.measured:.6g} vs {c.bound:.6g}" for c in report.failures() if c.hard)
        raise InvariantViolation("audit", f"Round {state.rounds} failed {failed}")
    return report


# schedules

@dataclass
class HalvingReport:
    halved: bool
    degenerate: bool
    rounds: int
    initial_measure: MeasureEstimate
    final_measure: MeasureEstimate
    final_curve: CurveC1
    center: CurveC1
    radius: float
    worst_case_bound: float
    state: PassState
    audits: List[AuditReport] = field(default_factory=list)

    @property
    def trajectory(self) -> List[Tuple[int, float]]:
        return [(row.round, row.measure) for row in self.state.audit]

    def summary(self) -> Dict[str, object]:
        return {
            "halved": self.halved,
            "degenerate": self.degenerate,
            "rounds": self.rounds,
            "initial_measure": self.initial_measure.value,
            "final_measure": self.final_measure.value,
            "final_measure_error": self.final_measure.error_bound,
            "radius": self.radius,
            "worst_case_bound": self.worst_case_bound,
            "params": self.state.params.as_dict(),
        }


def halving_run(f1: CurveC1, sigma: float, oracle: PorousSetOracle, params: EngineParams,
                adversary: Optional[Adversary] = None, seed: int = 0, audit: bool = True) -> HalvingReport:
    """Run passes until |f_n^-1(E)| < |f_1^-1(E)| / 2 or the round cap is reached."""
    params = params.rebased(f1, sigma)
    state = initial_state(f1, params, oracle, seed)
    initial = state.initial_measure
    worst = params.shrink ** params.N * initial.value + 18.0 * params.eps
    if initial.upper == 0.0:
        logger.info("Halving run is degenerate: the initial preimage is empty")
        return HalvingReport(True, True, 0, initial, initial, f1, f1, params.sigma, worst, state)
    target = 0.5 * initial.value
    audits = []
    while state.current_measure.upper >= target and state.rounds < params.N:
        state = run_pass(state, params, oracle, adversary)
        if audit:
            audits.append(audit_measure_bounds(state, oracle))
    final = state.current_measure
    halved = final.upper < target
    if halved:
        logger.info(f"Halved {initial.value:.6g} -> {final.value:.6g} in {state.rounds} rounds")
    else:
        logger.warning(f"Not halved after {state.rounds} rounds: {initial.value:.6g} -> {final.value:.6g}")
    return HalvingReport(halved, False, state.rounds, initial, final, state.f, state.g or f1,
                         state.delta, worst, state, audits)


@dataclass
class ScheduleReport:
    target: float
    success: bool
    final_curve: CurveC1
    trajectories: Dict[int, List[float]]
    milestones: List[Tuple[int, int, int, bool]] = field(default_factory=list)
    failed: List[int] = field(default_factory=list)

    @property
    def monotone(self) -> Dict[int, bool]:
        return {m: all(b <= a + 1e-12 for a, b in zip(traj[:-1], traj[1:])) for m, traj in self.trajectories.items()}

    def rows(self) -> List[Tuple[int, int, float]]:
        return [(step, piece, value) for piece, traj in sorted(self.trajectories.items())
                for step, value in enumerate(traj)]


def sigma_porous_schedule(pieces: Sequence[PorousSetOracle], target: float, f1: CurveC1, params: EngineParams,
                          adversary: Optional[Adversary] = None, seed: int = 0, max_sweeps: int = 4) -> ScheduleReport:
    """
    Drive every piece below target on one curve by nested halving runs.

    Each halving run is centred on the curve the previous one ended with; the measures of all
    pieces are recorded after every run.
    """
    if target <= 0:
        raise DomainError(f"Target must be positive, got {target}")
    if not pieces:
        return ScheduleReport(target, True, f1, {})
    curve = f1
    measures = lambda c: [_measure(c, piece, params).upper for piece in pieces]
    trajectories = {m: [v] for m, v in enumerate(measures(curve))}
    milestones: List[Tuple[int, int, int, bool]] = []
    failed: List[int] = []
    for _ in range(max_sweeps):
        if all(traj[-1] < target for traj in trajectories.values()):
            break
        for m, piece in enumerate(pieces):
            if m in failed:
                continue
            budget = math.ceil(math.log2(max(trajectories[m][-1] / target, 1.0))) + 1
            for _ in range(budget):
                if trajectories[m][-1] < target:
                    break
                report = halving_run(curve, params.sigma, piece, params, adversary, seed + len(milestones))
                curve = report.final_curve
                for j, value in enumerate(measures(curve)):
                    trajectories[j].append(value)
                milestones.append((len(milestones) + 1, m, report.rounds, report.halved))
                if not report.halved:
                    failed.append(m)
                    break
    success = all(traj[-1] < target for traj in trajectories.values())
    if not success:
        logger.warning(f"Schedule did not reach target {target} on pieces "
                       f"{[m for m, t in trajectories.items() if t[-1] >= target]}")
    return ScheduleReport(target, success, curve, trajectories, milestones, failed)
