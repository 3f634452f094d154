"""
Hardy-Bellman Laboratory
Numerics for the extremal problem of the Hardy operator under two moment constraints,
and its dyadic counterpart for the maximal operator.

Components:
- bellman_core: H_p, its inverse omega_p and the Bellman value B_p(f, F)
- monotone_fn: non-increasing step functions, Phi_p, the eigen-defect, L^p distances
- quadrature: exact and adaptive cell integrals of (v + a/t)^P t^(-s)
- extremal: the power-law extremal g0 and near-extremal families
- optimizer: projected-gradient ascent of Phi_p
- dyadic_sim: maximal operator, alpha trees and the sandwich bounds

Driver:
- experiments / acceptance: one function per CLI command, acceptance suites
- reporting: JSON/CSV reports
- run_lab: argparse entry point
"""

__version__ = "1.0.0"

from .models import (
    AcceptanceFailure,
    DomainError,
    InfeasibleProjectionError,
    MomentPair,
    PParams,
    PowerLawFunction,
    RunReport,
    SandwichResult,
)
from .bellman_core import bellman_value, omega_p, hp_eval
from .monotone_fn import StepFunction, defect, lp_distance, phi_functional
from .extremal import build_g0, discretize_g0, make_sequence
from .optimizer import maximize
from .dyadic_sim import AlphaTree, DyadicTree, LeafFunction, maximal_operator, sandwich

__all__ = [
    '__version__',

    # Types and errors
    'AcceptanceFailure',
    'DomainError',
    'InfeasibleProjectionError',
    'MomentPair',
    'PParams',
    'PowerLawFunction',
    'RunReport',
    'SandwichResult',

    # Numerics
    'bellman_value',
    'omega_p',
    'hp_eval',
    'StepFunction',
    'defect',
    'lp_distance',
    'phi_functional',
    'build_g0',
    'discretize_g0',
    'make_sequence',
    'maximize',
    'AlphaTree',
    'DyadicTree',
    'LeafFunction',
    'maximal_operator',
    'sandwich',
]
