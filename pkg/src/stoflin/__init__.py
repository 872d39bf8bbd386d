"""Feedback linearization of stochastic control systems.

Symbolic expressions and vector fields, Ito and Stratonovich coordinate
transforms, linearizing transformations and Monte Carlo checks.
"""
from .errors import (
    ConventionError,
    DimensionError,
    DomainError,
    IntegrationError,
    LinearizationError,
    ParseError,
    PreconditionError,
    StoflinError,
)
from .evaluate import Point, compile_exprs, evaluate
from .expr import Const, Expr, Param, Var, differentiate, simplify, substitute, to_string
from .fields import Distribution, MatrixField, VectorField
from .integrate import integrate
from .lie import (
    ad_iter,
    distribution_rank,
    involutive,
    lie_bracket,
    lie_derivative,
    second_order_apply,
    second_order_commutator_residual,
)
from .linearize import (
    LinearityReport,
    LinearizingTransformation,
    chain_from_lambda,
    check_det_sfb,
    controllability_rank,
    ito_g_conditions_given_lambda,
    linearize,
    sigma_linearize_check,
    solve_lambda_n2,
    strat_gsigma_check,
    verify_linear,
)
from .parser import parse
from .sampling import DomainSampler, equivalent
from .sim import SimConfig, TrajectoryEnsemble, compare_ensembles, pushforward_paths, simulate, verify_commutation
from .system import Convention, Diffeo, Feedback, StochasticSystem
from .transform import (
    apply_correcting,
    coord_transform,
    correcting_term,
    feedback_transform,
    ito_term,
    pushforward,
)

__version__ = "0.1.0"
