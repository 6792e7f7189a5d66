"""Polytopal stochastic games: exact polytopes, solvers, simulation and a modeling language."""

__version__ = "0.1.0"

from .discretize import ExtremeGame, build_extreme_game, check_irreducible, check_stopping
from .model import PSG, Average, Discounted, Player, Reach, Total, from_imdp_intervals, make_psg, validate
from .polytope import DistPolytope, LinearConstraint, build_dist_polytope, enumerate_vertices
from .simulate import SimConfig, SimReport, estimate, sample_path
from .solver import SolveOptions, SolveResult, Strategy, brute_force_value, evaluate_fixed, extract_strategies, solve, verify_fixpoint

__all__ = [
    "PSG", "Average", "Discounted", "DistPolytope", "ExtremeGame", "LinearConstraint", "Player", "Reach",
    "SimConfig", "SimReport", "SolveOptions", "SolveResult", "Strategy", "Total", "brute_force_value",
    "build_dist_polytope", "build_extreme_game", "check_irreducible", "check_stopping", "enumerate_vertices",
    "estimate", "evaluate_fixed", "extract_strategies", "from_imdp_intervals", "make_psg", "sample_path",
    "solve", "validate", "verify_fixpoint",
]
