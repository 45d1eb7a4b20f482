"""Flows of super vector fields and supergroup actions on superdomains."""

__version__ = "0.1.0"

from .expr import Expression, parse, evaluate, differentiate, is_zero_function
from .grassmann import GrassmannElement, GrassmannIndex, multiply, coefficient, parity_part, adjoin_generators
from .supergeometry import (
    SuperDomain,
    SuperFunction,
    SuperVectorField,
    MorphismData,
    apply_field,
    parity_split,
    super_bracket,
    pullback_scalar,
    pullback_superfunction,
    compose,
)
from .flow import (
    ODESettings,
    FlowProblem,
    FlowResult,
    FlowSample,
    FlowState,
    hierarchy_rhs,
    odd_part,
    integrate_flow,
    integrate_along_path,
    monodromy,
    verify_flow_equations,
)
from .oracle import lie_series_oracle
from .action import (
    SupergroupParams,
    CriterionReport,
    mu_pullback,
    right_invariant_fields,
    find_action_params,
    strong_flow_residual,
    verify_local_action,
)
