"""
Porous curves engine - certified geometry, porous set oracles and the avoidance passes.
"""

from .errors import (
    CantorConstructionError,
    ConfigError,
    DepthError,
    DomainError,
    InvariantViolation,
    ParameterError,
    PorousCurvesError,
    PreconditionError,
    ResolutionError,
)
from .geometry import CurveC1, IntervalSet, MeasureEstimate, gamma1_distance, sup_derivative_norm, sup_norm
from .porous import (
    CantorSpec,
    HoleWitness,
    Membership,
    PorosityMode,
    PorousSetOracle,
    fat_cantor_cylinder,
    ternary_cylinder,
)
from .preimage import preimage_measure, preimage_measure_on
from .vitali import select_disjoint_cover, truncate_cover
from .perturbation import build_tent, hole_interval, smooth
from .avoidance import (
    DESK_RELAXED,
    PAPER_STRICT,
    EngineParams,
    audit_measure_bounds,
    derive_params,
    halving_run,
    make_adversary,
    run_pass,
    sigma_porous_schedule,
)
from .martingale import martingale_diagnostics
from .power_porosity import counterexample_experiment, horizontal_neighborhood_check, tube_cover

__all__ = [
    'CantorConstructionError', 'ConfigError', 'DepthError', 'DomainError', 'InvariantViolation',
    'ParameterError', 'PorousCurvesError', 'PreconditionError', 'ResolutionError',
    'CurveC1', 'IntervalSet', 'MeasureEstimate', 'gamma1_distance', 'sup_derivative_norm', 'sup_norm',
    'CantorSpec', 'HoleWitness', 'Membership', 'PorosityMode', 'PorousSetOracle',
    'fat_cantor_cylinder', 'ternary_cylinder',
    'preimage_measure', 'preimage_measure_on',
    'select_disjoint_cover', 'truncate_cover',
    'build_tent', 'hole_interval', 'smooth',
    'DESK_RELAXED', 'PAPER_STRICT', 'EngineParams', 'audit_measure_bounds', 'derive_params',
    'halving_run', 'make_adversary', 'run_pass', 'sigma_porous_schedule',
    'martingale_diagnostics',
    'counterexample_experiment', 'horizontal_neighborhood_check', 'tube_cover',
]
