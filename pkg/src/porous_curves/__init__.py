"""
porous-curves - avoiding porous sets with C1 curves, as computations.

Certified preimage measures, disjoint Vitali covers, tent perturbations and the avoidance
passes that halve |f^-1(E)| for c-porous E, plus the power-p porous counterexample.
"""

from .cli import ExperimentRunner, main, run_experiment
from .config import Settings, get_settings

__version__ = "0.1.0"
__all__ = ['ExperimentRunner', 'main', 'run_experiment', 'Settings', 'get_settings']
