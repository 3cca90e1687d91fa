"""
porous-curves command line - seeded experiments on porous sets and C1 curves.

Every subcommand reads a JSON experiment config, validates it, runs the matching engine
pipeline and writes <out-dir>/<experiment>/summary.json plus one CSV per table. The exit
status is 0 exactly when every audited inequality of the run passed.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .config import Settings, get_settings
from .engine.avoidance import (DESK_RELAXED, PAPER_STRICT, audit_measure_bounds, derive_params, halving_run,
                               initial_state, make_adversary, run_pass,
                               sigma_porous_schedule)
from .engine.errors import ConfigError, ParameterError
from .engine.geometry import CurveC1
from .engine.martingale import martingale_diagnostics
from .engine.porous import (CantorSpec, PorosityMode, PorousSetOracle, empty_oracle, estimate_porosity_constant,
                            fat_cantor_cylinder, ternary_cylinder)
from .engine.power_porosity import (WITNESS_COLUMNS, counterexample_experiment, horizontal_neighborhood_check,
                                    witness_sweep)
from .engine.preimage import preimage_measure
from .reports import RunReport, write_report
from .schemas import list_experiments, validate_config

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_C = 0.5


def _num(value: Any) -> float:
    """JSON numbers and validated decimal strings alike."""
    return float(value)


def build_oracle(spec: Dict[str, Any], path: str = "oracle") -> PorousSetOracle:
    kind = spec["type"]
    dim = int(spec.get("ambient_dim", 2))
    if kind == "empty":
        return empty_oracle(dim)
    if "depth" not in spec:
        raise ConfigError(f"'{kind}' oracles need a depth", f"{path}.depth")
    depth = int(spec["depth"])
    if spec.get("mode", "c-porous") == "power":
        if "p" not in spec:
            raise ConfigError("power mode needs an exponent", f"{path}.p")
        mode = PorosityMode.power(_num(spec["p"]))
    else:
        mode = PorosityMode.c_porous(_num(spec.get("c", DEFAULT_C)))
    if kind == "fat-cantor":
        if "mu" not in spec:
            raise ConfigError("fat Cantor oracles need mu", f"{path}.mu")
        return fat_cantor_cylinder(CantorSpec(_num(spec["mu"]), depth), mode, dim, _num(spec.get("offset", 0.0)))
    elif kind == "ternary":
        if mode.kind != PorosityMode.C_POROUS:
            raise ConfigError("ternary oracles are c-porous only", f"{path}.mode")
        return ternary_cylinder(depth, mode.value, dim, _num(spec.get("offset", 0.0)))
    else:
        raise ConfigError(f"Unknown oracle type: {kind}", f"{path}.type")


def build_curve(spec: Dict[str, Any]) -> CurveC1:
    if spec["type"] == "line":
        return CurveC1.line([_num(v) for v in spec["start"]], [_num(v) for v in spec["velocity"]])
    return CurveC1.from_hermite(
        [_num(v) for v in spec["breakpoints"]],
        [[_num(v) for v in row] for row in spec["positions"]],
        [[_num(v) for v in row] for row in spec["derivatives"]],
    )


class ExperimentRunner:
    """Runs validated experiment configs and collects their reports."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        logger.info("Experiment runner initialized successfully")

    def _params(self, config: Dict[str, Any], f1: CurveC1, oracle: PorousSetOracle):
        engine = config["engine"]
        mode = engine.get("mode", DESK_RELAXED)
        tol = _num(engine.get("tolerance", DEFAULT_TOLERANCE))
        max_depth = int(engine.get("max_depth", self.settings.max_bisection_depth))
        if "c" in engine:
            c = _num(engine["c"])
        elif oracle.mode.kind == PorosityMode.C_POROUS:
            c = oracle.mode.value
        else:
            c = DEFAULT_C
        initial = None
        if mode == PAPER_STRICT:
            initial = preimage_measure(f1, oracle, tol, max_depth).measure.value
        params = derive_params(
            f1, _num(engine["sigma"]), _num(engine["eps"]), c, mode,
            lam=_num(engine["lambda"]) if "lambda" in engine else None,
            rounds=engine.get("rounds"), initial_measure=initial, tol=tol, max_depth=max_depth,
        )
        if not params.feasible:
            raise ParameterError(f"Refusing to run beyond desk scale: lambda={params.lam:.4g}, N={params.N}")
        return params

    @staticmethod
    def _adversary(config: Dict[str, Any]):
        spec = config.get("adversary", {"name": "stay"})
        return make_adversary(spec["name"], int(spec.get("samples", 8)))

    @staticmethod
    def _measure_rows(state) -> List[tuple]:
        return [(row.round, row.measure, row.measure_error, row.bound_rhs) for row in state.audit]

    def run(self, name: str, config: Dict[str, Any], seed: int) -> RunReport:
        logger.info(f"Executing experiment: {name} with seed {seed}")
        report = RunReport(kind=name, config=config, seed=seed)
        started = time.perf_counter()

        if name == "avoid":
            self._avoid(config, seed, report)
        elif name == "halving":
            self._halving(config, seed, report)
        elif name == "martingale":
            self._martingale(config, seed, report)
        elif name == "sigma-schedule":
            self._schedule(config, seed, report)
        elif name == "counterexample":
            self._counterexample(config, seed, report)
        elif name == "porosity-check":
            self._porosity_check(config, seed, report)
        else:
            raise ValueError(f"Unknown experiment: {name}")

        report.wall_clock = time.perf_counter() - started
        logger.info(f"Experiment {name} executed successfully")
        return report

    def _avoid(self, config, seed, report):
        oracle = build_oracle(config["oracle"])
        f1 = build_curve(config["curve"])
        params = self._params(config, f1, oracle)
        state = initial_state(f1, params, oracle, seed)
        state = run_pass(state, params, oracle, self._adversary(config))
        audit = audit_measure_bounds(state, oracle, strict=False)
        for check in audit.checks:
            if check.hard:
                report.check(check.name, check.passed, check.measured, check.bound)
        report.summary = {
            "params": params.as_dict(),
            "initial_measure": state.initial_measure.value,
            "measure": state.current_measure.value,
            "measure_error": state.current_measure.error_bound,
            "soft_checks": [asdict(c) for c in audit.checks if not c.hard],
        }
        report.add_table("measure-vs-round", self._measure_rows(state))
        report.add_table("audit", state.audit_rows())
        report.add_table("interval-strip", state.interval_rows())

    def _halving(self, config, seed, report):
        oracle = build_oracle(config["oracle"])
        f1 = build_curve(config["curve"])
        params = self._params(config, f1, oracle)
        result = halving_run(f1, params.sigma, oracle, params, self._adversary(config), seed,
                             audit=config.get("audit", True))
        for audit in result.audits:
            for check in audit.checks:
                if check.hard:
                    report.check(f"round-{audit.round}/{check.name}", check.passed, check.measured, check.bound)
        report.summary = result.summary()
        report.add_table("measure-vs-round", self._measure_rows(result.state))
        report.add_table("audit", result.state.audit_rows())
        report.add_table("interval-strip", result.state.interval_rows())

    def _martingale(self, config, seed, report):
        oracle = build_oracle(config["oracle"])
        f1 = build_curve(config["curve"])
        params = self._params(config, f1, oracle)
        result = halving_run(f1, params.sigma, oracle, params, self._adversary(config), seed)
        report.add_table("measure-vs-round", self._measure_rows(result.state))
        if not result.state.increments:
            logger.warning("No completed pass; the martingale is identically zero")
            report.summary = {"halving": result.summary(), "martingale": None}
            return
        diag = martingale_diagnostics(result.state)
        report.check("orthogonal-increments", diag.orthogonal, diag.max_pairwise)
        report.check("second-moment", diag.second_moment <= diag.bound, diag.second_moment, diag.bound)
        report.check("kolmogorov", diag.exceedance_measure <= diag.kolmogorov_bound,
                     diag.exceedance_measure, diag.kolmogorov_bound)
        report.summary = {"halving": result.summary(), "martingale": diag.summary()}
        report.add_table("martingale", diag.round_rows())
        report.add_table("martingale-histogram", diag.histogram)

    def _schedule(self, config, seed, report):
        pieces = [build_oracle(spec, f"pieces.{i}") for i, spec in enumerate(config["pieces"])]
        f1 = build_curve(config["curve"])
        reference = pieces[0] if pieces else empty_oracle(f1.dim)
        params = self._params(config, f1, reference)
        result = sigma_porous_schedule(pieces, _num(config["target"]), f1, params, self._adversary(config),
                                       seed, int(config.get("max_sweeps", 4)))
        report.check("target-reached", result.success,
                     [traj[-1] for _, traj in sorted(result.trajectories.items())], result.target)
        report.summary = {
            "params": params.as_dict(),
            "success": result.success,
            "milestones": result.milestones,
            "failed_pieces": result.failed,
            "monotone": {str(k): v for k, v in result.monotone.items()},
            "final_curve": result.final_curve.to_record(),
        }
        report.add_table("schedule", result.rows())

    def _counterexample(self, config, seed, report):
        mu, p, depth, eps = _num(config["mu"]), _num(config["p"]), int(config["depth"]), _num(config["eps"])
        delta = _num(config.get("delta", 0.1))
        result = counterexample_experiment(mu, p, depth, eps, delta, seed,
                                           family_size=int(config.get("family_size", 4)),
                                           tol=_num(config.get("tolerance", 1e-6)),
                                           witness_samples=int(config.get("witness_samples", 200)))
        report.check("tube-area", result.area_T < eps, result.area_T, eps)
        report.check("preimage-identity", result.identity_holds,
                     [result.preimage_A.value, result.perturbed_A.value],
                     [result.preimage_B.value, result.perturbed_B.value])
        report.check("perturbed-positive", result.perturbed_A.lower > 0.0, result.perturbed_A.lower, 0.0)
        report.check("image-in-tube", result.image_in_tube)
        report.check("power-p-witnesses", result.witness_failures == 0, result.witness_failures, 0)
        B = fat_cantor_cylinder(CantorSpec(mu, depth), PorosityMode.power(p))
        neighborhood = horizontal_neighborhood_check(B, delta, int(config.get("trials", 8)), seed)
        report.check("horizontal-neighborhood", neighborhood.passed, neighborhood.min_measure,
                     neighborhood.certified_delta)
        report.summary = {**result.summary(), "certified_delta": neighborhood.certified_delta,
                          "min_trial_measure": neighborhood.min_measure}
        report.add_table("tubes", result.tubes.rows())
        report.add_table("trials", neighborhood.rows())
        report.add_table("interval-strip", [(0, "C", lo, hi) for lo, hi in B.first_coordinate_set.to_rows()])

    def _porosity_check(self, config, seed, report):
        oracle = build_oracle(config["oracle"])
        rng = np.random.default_rng(seed)
        scales = [_num(s) for s in config.get("scales", [0.1, 0.01, 0.001])]
        estimate = estimate_porosity_constant(oracle, int(config.get("samples", 100)), scales, seed)
        depth = int(config["oracle"].get("depth", 1))
        points = oracle.sample_points(int(config.get("witness_queries", 100)), rng)
        queries = witness_sweep(oracle, points, rng, 2.0 ** -max(depth - 1, 2)) if len(points) else []
        failures = sum(1 for q in queries if not q.verified)
        report.check("witnesses", failures == 0, failures, 0)
        report.summary = {
            "kind": oracle.kind,
            "mode": oracle.mode.kind,
            "mode_value": oracle.mode.value,
            "porosity_estimate": estimate,
            "witness_queries": len(queries),
            "witness_failures": failures,
        }
        report.add_table("trials", [q.row() for q in queries], WITNESS_COLUMNS)
        base = oracle.first_coordinate_set
        if base is not None:
            report.add_table("interval-strip", [(0, "F", lo, hi) for lo, hi in base.to_rows()])


def run_experiment(name: str, config: Dict[str, Any], seed: Optional[int] = None,
                   out_dir: Optional[Path] = None, fmt: Optional[str] = None,
                   settings: Optional[Settings] = None) -> RunReport:
    """Validate, run and write one experiment; flags override the config, which overrides settings."""
    settings = settings or get_settings()
    validate_config(name, config)
    seed = seed if seed is not None else int(config.get("seed", settings.default_seed))
    out_dir = Path(out_dir) if out_dir is not None else Path(config.get("out_dir", settings.out_dir))
    fmt = fmt or config.get("format", "csv")
    report = ExperimentRunner(settings).run(name, config, seed)
    write_report(report, out_dir, fmt)
    if not report.passed:
        logger.error(f"Experiment {name} failed {len(report.failures)} audited checks: "
                     f"{[v.check for v in report.failures]}")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="porous-curves", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for experiment in list_experiments():
        cmd = sub.add_parser(experiment["name"], help=experiment["description"])
        cmd.add_argument("--config", type=Path, required=True, help="JSON experiment config")
        cmd.add_argument("--seed", type=int, help="Root seed; overrides the config")
        cmd.add_argument("--out-dir", type=Path, help="Output directory; overrides the config")
        cmd.add_argument("--format", choices=["csv", "summary"], help="Write CSV tables or the summary only")
    return parser


def main(argv: Optional[List[str]] = None):
    """Main entry point for the command line."""
    settings = get_settings()
    logging.basicConfig(level=settings.log_level)
    args = build_parser().parse_args(argv)
    arguments = {"config": str(args.config), "seed": args.seed, "out_dir": str(args.out_dir or "")}
    try:
        with open(args.config, encoding="utf-8") as handle:
            config = json.load(handle)
        report = run_experiment(args.experiment, config, args.seed, args.out_dir, args.format, settings)
    except Exception as e:
        error_result = {
            "error": str(e),
            "experiment": args.experiment,
            "arguments": arguments,
        }
        logger.error(f"Experiment {args.experiment} execution failed: {str(e)}")
        print(json.dumps(error_result, indent=2))
        sys.exit(1)
    print(json.dumps({"experiment": report.kind, "passed": report.passed, "seed": report.seed}, indent=2))
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
