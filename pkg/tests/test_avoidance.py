from dataclasses import replace

import pytest

from porous_curves.engine.avoidance import (
    DESK_RELAXED,
    PAPER_STRICT,
    audit_measure_bounds,
    bound_rhs,
    choose_delta,
    derive_params,
    halving_run,
    initial_state,
    make_adversary,
    run_pass,
    sigma_porous_schedule,
    stopping_set,
    strict_condition,
    strict_round_count,
)
from porous_curves.engine.errors import DomainError, InvariantViolation, ParameterError, PreconditionError
from porous_curves.engine.geometry import CurveC1, IntervalSet, MeasureEstimate, gamma1_distance
from porous_curves.engine.martingale import martingale_diagnostics
from porous_curves.engine.perturbation import build_tent
from porous_curves.engine.porous import (
    CantorSpec,
    CylinderOracle,
    PorosityMode,
    empty_oracle,
    fat_cantor_cylinder,
    ternary_cylinder,
)

SIGMA = 0.8
EPS = 0.01
LAMBDA = 16.0
ROUNDS = 5


def edge_params(rounds: int = ROUNDS):
    return derive_params(CurveC1.line([1.0 / 3.0, 0.0], [0.0, 1.0]), SIGMA, EPS, 0.5, lam=LAMBDA, rounds=rounds)


@pytest.fixture(scope="module")
def five_rounds():
    """Five stay-adversary passes on the edge line against the depth-4 ternary cylinder."""
    f1 = CurveC1.line([1.0 / 3.0, 0.0], [0.0, 1.0])
    oracle = ternary_cylinder(4)
    params = edge_params()
    state = initial_state(f1, params, oracle)
    for _ in range(ROUNDS):
        state = run_pass(state, params, oracle)
    return state, oracle


@pytest.fixture(scope="module")
def slow_slab_rounds():
    """
    Three stay-adversary passes of a slow horizontal segment inside the slab [0.2, 0.5] x R.

    The first tent pushes the segment through x = 0.5; the falling side re-enters the slab
    slowly enough to be porous again, so the second pass places a tent of its own.
    """
    oracle = CylinderOracle(IntervalSet([0.2], [0.5]), PorosityMode.c_porous(0.2))
    f1 = CurveC1.line([0.465, 0.0], [0.03, 0.0])
    params = derive_params(f1, SIGMA, EPS, 0.2, lam=LAMBDA, rounds=3)
    states = [initial_state(f1, params, oracle)]
    for _ in range(3):
        states.append(run_pass(states[-1], params, oracle))
    return states, oracle


def reference_oracle():
    """Fat Cantor cylinder, mu = 0.3, depth 6, c = 1/2."""
    return fat_cantor_cylinder(CantorSpec(0.3, 6), PorosityMode.c_porous(0.5))


REFERENCE_ADVERSARIES = {
    "stay": lambda: make_adversary("stay"),
    "worst-sampled": lambda: make_adversary("worst-sampled", samples=2),
    "custom": lambda: make_adversary("custom", func=lambda g, delta, rng: g.translated([0.5 * delta, 0.0])),
}


class TestDeriveParams:
    def test_desk_mode(self, edge_line):
        params = derive_params(edge_line, SIGMA, EPS, 0.5, lam=LAMBDA, rounds=ROUNDS)
        assert params.mode == DESK_RELAXED and not params.strict_gate
        assert params.N == ROUNDS and params.lam == LAMBDA
        assert params.M == pytest.approx(1.0 + SIGMA)
        assert params.Q == pytest.approx(0.5 / (4.0 * 1.8))
        assert params.kappa == pytest.approx(0.1 - 1.0 / 16.0)
        assert params.as_dict()["lambda"] == LAMBDA

    @pytest.mark.parametrize(
        "kwargs, error",
        [
            ({"sigma": 0.0}, DomainError),
            ({"c": 1.0}, DomainError),
            ({"eps": 0.0}, DomainError),
            ({"mode": "exact"}, DomainError),
            ({"lam": None}, ParameterError),
            ({"lam": 15.0}, ParameterError),
            ({"rounds": 0}, ParameterError),
        ],
    )
    def test_rejects(self, edge_line, kwargs, error):
        args = {"sigma": SIGMA, "eps": EPS, "c": 0.5, "lam": LAMBDA, "rounds": ROUNDS}
        args.update(kwargs)
        with pytest.raises(error):
            derive_params(edge_line, **args)

    def test_round_count(self):
        # sigma / 8 = 1 and kappa = 3/4 are exact
        assert strict_round_count(4.0, 8.0, 1.0) == 9
        assert strict_round_count(4.0, 8.0, 0.5) == 4

    def test_strict_mode_is_beyond_desk_scale(self):
        line = CurveC1.line([0.0, 0.0], [1.0, 0.0])
        params = derive_params(line, SIGMA, 1.0 / 72.0, 0.45, mode=PAPER_STRICT)
        assert params.mode == PAPER_STRICT and params.strict_gate
        assert params.Q == pytest.approx(1.0 / 16.0)
        assert 1e5 <= params.lam < 1e6
        assert not params.feasible
        assert params.strict_margin() < 0.0
        assert strict_condition(params.lam, SIGMA, params.eps, params.Q) < 0.0

    def test_strict_mode_checks_eps_against_initial_measure(self):
        line = CurveC1.line([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ParameterError):
            derive_params(line, SIGMA, 1.0 / 72.0, 0.45, mode=PAPER_STRICT, initial_measure=1.0)


class TestStoppingSet:
    def test_steep_tent_is_flagged(self, edge_line, edge_cover):
        # tent slope 1/16 against sigma / 4 = 1/20
        psi = build_tent(edge_line, edge_cover, 1)
        result = stopping_set(edge_line, psi, edge_line, 0.2)
        assert result.flagged == [0] and result.L == 0
        assert result.C.total_length() == pytest.approx(psi.tents[0].interval.length)

    def test_gentle_tent_survives(self, edge_line, edge_cover):
        psi = build_tent(edge_line, edge_cover, 1)
        result = stopping_set(edge_line, psi, edge_line, SIGMA)
        assert result.flagged == [] and result.L == 1 and result.C.is_empty


class TestChooseDelta:
    def test_curve_in_gap(self):
        line = CurveC1.line([0.5, 0.0], [0.0, 1.0])
        delta, growth = choose_delta(line, ternary_cylinder(4), IntervalSet.unit(), 0.1, 1e-3, edge_params())
        assert delta == pytest.approx(0.05)
        assert growth <= 1e-3


class TestRunPass:
    def test_audit_rows(self, five_rounds):
        state, _ = five_rounds
        rows = state.audit_rows()
        assert len(rows) == ROUNDS + 1
        assert [row[0] for row in rows] == list(range(ROUNDS + 1))
        assert rows[0][1] == pytest.approx(1.0)

    def test_first_round_halves(self, five_rounds):
        state, _ = five_rounds
        assert state.audit[1].measure < 1e-6
        assert state.audit[1].tents == 1

    def test_later_rounds_are_idle(self, five_rounds):
        state, _ = five_rounds
        for row in state.audit[2:]:
            assert row.tents == 0 and row.covered_len == 0.0

    def test_deltas_shrink(self, five_rounds):
        state, _ = five_rounds
        deltas = [row.delta for row in state.audit]
        assert all(b <= a / 2.0 for a, b in zip(deltas[:-1], deltas[1:]))
        assert all(row.delta <= SIGMA / 2.0 ** (row.round + 3) for row in state.audit[1:])

    def test_audits_pass(self, five_rounds):
        state, oracle = five_rounds
        report = audit_measure_bounds(state, oracle)
        assert report.passed, f"failed checks {report.failures()}"
        names = [name for _, name, _, _, _ in report.rows()]
        assert names[:ROUNDS] == [f"window-{m}" for m in range(1, ROUNDS + 1)]

    def test_interval_rows(self, five_rounds):
        state, _ = five_rounds
        kinds = {kind for _, kind, _, _ in state.interval_rows()}
        assert {"cover", "hole", "F"} <= kinds

    def test_martingale_rows(self, five_rounds):
        state, _ = five_rounds
        report = martingale_diagnostics(state)
        rows = report.round_rows()
        assert len(rows) == ROUNDS
        assert rows[0] == (1, 0.0, 0.0, 0.0, 0.0)
        assert report.passed

    def test_worst_sampled_stays_in_ball(self, edge_line, ternary):
        params = edge_params()
        state = run_pass(initial_state(edge_line, params, ternary), params, ternary,
                         make_adversary("worst-sampled", samples=2))
        assert gamma1_distance(state.f, state.g) < state.delta

    def test_custom_adversary_outside_ball(self, edge_line, ternary):
        params = edge_params()
        adversary = make_adversary("custom", func=lambda g, delta, rng: g.translated([1.0, 0.0]))
        with pytest.raises(PreconditionError):
            run_pass(initial_state(edge_line, params, ternary), params, ternary, adversary)


    def test_slow_slab_places_a_tent_in_the_second_round(self, slow_slab_rounds):
        states, oracle = slow_slab_rounds
        state = states[-1]
        assert state.audit[1].tents == 1 and state.audit[2].tents >= 1
        for s in states[1:]:
            assert audit_measure_bounds(s, oracle).passed

    def test_slow_slab_increments_are_orthogonal(self, slow_slab_rounds):
        states, _ = slow_slab_rounds
        report = martingale_diagnostics(states[-1])
        assert report.rounds == 3
        assert sum(1 for moment in report.increment_moments if moment > 0.0) >= 2
        assert report.orthogonal and report.passed
        assert report.second_moment == pytest.approx(report.moment_sum, abs=1e-12)
        assert report.second_moment <= report.bound


class TestReferenceInstance:
    """Horizontal segment against the depth-6 fat Cantor cylinder, five rounds per adversary."""

    @pytest.mark.parametrize("name", sorted(REFERENCE_ADVERSARIES))
    def test_every_round_passes_its_audit(self, name):
        oracle = reference_oracle()
        f1 = CurveC1.line([0.0, 0.0], [1.0, 0.0])
        params = derive_params(f1, SIGMA, EPS, 0.5, lam=LAMBDA, rounds=ROUNDS)
        adversary = REFERENCE_ADVERSARIES[name]()
        state = initial_state(f1, params, oracle)
        assert state.initial_measure.value == pytest.approx(0.284992, abs=1e-6)
        for _ in range(ROUNDS):
            state = run_pass(state, params, oracle, adversary)
            report = audit_measure_bounds(state, oracle)
            assert report.passed, f"round {state.rounds} failed {report.failures()}"
            assert gamma1_distance(state.f, state.g) < state.delta
            aggregate = next(c for c in report.checks if c.name == "aggregate")
            assert aggregate.bound < 1.0
        assert state.rounds == ROUNDS


class TestAudit:
    def test_partition_failure(self, edge_line, ternary):
        state = initial_state(edge_line, edge_params(), ternary)
        broken = replace(state, remaining=IntervalSet.empty())
        with pytest.raises(InvariantViolation):
            audit_measure_bounds(broken, ternary)
        report = audit_measure_bounds(broken, ternary, strict=False)
        assert not report.passed
        assert [c.name for c in report.failures()] == ["partition"]

    def test_aggregate_formula(self, five_rounds):
        state, _ = five_rounds
        params = state.params
        expected = (params.shrink ** ROUNDS * state.initial_measure.upper
                    + sum(C.total_length() for C in state.C_sets)
                    + 8.0 * EPS * (1.0 - 0.5 ** ROUNDS)
                    + sum(state.residues))
        assert bound_rhs(state) == pytest.approx(expected, rel=1e-12)
        assert state.audit[-1].bound_rhs == pytest.approx(expected, rel=1e-12)
        assert state.audit[0].bound_rhs == pytest.approx(state.initial_measure.upper)

    def test_aggregate_bound_can_fail(self, slow_slab_rounds):
        states, oracle = slow_slab_rounds
        after_first = states[1]
        assert audit_measure_bounds(after_first, oracle).passed
        broken = replace(after_first, initial_measure=MeasureEstimate(0.2))
        report = audit_measure_bounds(broken, oracle, strict=False)
        assert [c.name for c in report.failures()] == ["aggregate"]
        with pytest.raises(InvariantViolation):
            audit_measure_bounds(broken, oracle)


class TestAdversaries:
    def test_unknown(self):
        with pytest.raises(DomainError):
            make_adversary("greedy")

    def test_custom_needs_callable(self):
        with pytest.raises(DomainError):
            make_adversary("custom")

    def test_samples_positive(self):
        with pytest.raises(DomainError):
            make_adversary("worst-sampled", samples=0)


class TestHalvingRun:
    def test_edge_line_halves_in_one_round(self, edge_line, ternary):
        report = halving_run(edge_line, SIGMA, ternary, edge_params())
        assert report.halved and not report.degenerate
        assert report.rounds == 1
        assert report.trajectory[0] == (0, pytest.approx(1.0))
        assert all(audit.passed for audit in report.audits)
        assert report.summary()["rounds"] == 1

    def test_empty_set_is_degenerate(self, edge_line):
        report = halving_run(edge_line, SIGMA, empty_oracle(), edge_params())
        assert report.halved and report.degenerate and report.rounds == 0
        assert report.final_curve is edge_line

    def test_lambda_checked_against_new_sigma(self, edge_line, ternary):
        with pytest.raises(ParameterError):
            halving_run(edge_line, 0.5, ternary, edge_params())


class TestSchedule:
    def test_two_ternary_pieces(self, edge_line):
        pieces = [ternary_cylinder(4), ternary_cylinder(4, offset=2.0)]
        report = sigma_porous_schedule(pieces, 0.5, edge_line, edge_params())
        assert report.success and not report.failed
        assert all(value == 0.0 for value in report.trajectories[1])
        assert all(report.monotone.values())
        assert report.milestones[0][1] == 0 and report.milestones[0][3]

    def test_two_fat_cantor_pieces_sharing_an_edge(self):
        # both pieces end at x = 0.35, where their first gaps open
        pieces = [
            fat_cantor_cylinder(CantorSpec(0.3, 6), PorosityMode.c_porous(0.5)),
            fat_cantor_cylinder(CantorSpec(0.25, 6), PorosityMode.c_porous(0.5), offset=-0.025),
        ]
        line = CurveC1.line([0.35 - 1e-6, 0.0], [0.0, 1.0])
        report = sigma_porous_schedule(pieces, 0.05, line, edge_params())
        assert [report.trajectories[m][0] for m in (0, 1)] == [pytest.approx(1.0), pytest.approx(1.0)]
        assert report.success and not report.failed
        assert all(traj[-1] < 0.05 for traj in report.trajectories.values())

    def test_no_pieces(self, edge_line):
        report = sigma_porous_schedule([], 0.5, edge_line, edge_params())
        assert report.success and report.rows() == []

    def test_target_must_be_positive(self, edge_line, ternary):
        with pytest.raises(DomainError):
            sigma_porous_schedule([ternary], 0.0, edge_line, edge_params())
