"""Discrete weak K.A.M. solutions, Lax-Oleinik operators and the singular
dynamics of exact twist maps of the annulus."""

__version__ = "0.1.0"

from twistkam._backend import NAME as BACKEND
from twistkam.generating import (Family, GeneratingFunction, InvalidModelError,
                                 TwistViolationError, eval_s, d1, d2, standard_map,
                                 standard_map_inv, verify_hypotheses)
from twistkam.grid import (GridFunction, SuperdiffInterval, eval_grid, oscillation,
                           semiconcavity_constant, superdifferential)
from twistkam.lax_oleinik import (OperatorResult, WindowExhaustedError, o_n_set, t_minus,
                                  t_minus_n, t_plus, t_plus_n)
from twistkam.weak_kam import (ConjugatePair, SolveReport, alpha_sweep, conjugate_plus,
                               effective_interaction, projected_aubry, weak_kam_backward)
from twistkam.singular import (CircleMapLift, PseudoGraph, SingularOrbit, alpha_limit_set,
                               detect_singularities, diagram_check, lambda_map,
                               propagate_singularity, pseudo_graph, regularization_check,
                               rotation_number, sigma_plus_lift)

__all__ = [
    "BACKEND", "Family", "GeneratingFunction", "InvalidModelError", "TwistViolationError",
    "eval_s", "d1", "d2", "standard_map", "standard_map_inv", "verify_hypotheses",
    "GridFunction", "SuperdiffInterval", "eval_grid", "oscillation", "semiconcavity_constant",
    "superdifferential", "OperatorResult", "WindowExhaustedError", "o_n_set", "t_minus",
    "t_minus_n", "t_plus", "t_plus_n", "ConjugatePair", "SolveReport", "alpha_sweep",
    "conjugate_plus", "effective_interaction", "projected_aubry", "weak_kam_backward",
    "CircleMapLift", "PseudoGraph", "SingularOrbit", "alpha_limit_set", "detect_singularities",
    "diagram_check", "lambda_map", "propagate_singularity", "pseudo_graph",
    "regularization_check", "rotation_number", "sigma_plus_lift",
]
