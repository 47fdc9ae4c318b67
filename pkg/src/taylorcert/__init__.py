"""Certified integration of truncated-Taylor surrogate ODEs.

Scalar initial value problems are integrated through a per-segment
Taylor truncation with coefficients frozen at the latest sampling
point. The toolkit builds admissible non-uniform sampling sequences,
integrates the surrogate next to a high-accuracy reference, evaluates
a-priori error certificates, and searches for shadowing initial
conditions of pseudo-orbits. Hot kernels compile with numba by default;
set TAYLORCERT_DISABLE_NUMBA=1 for the plain NumPy build.
"""

from ._kernels import active_backend, set_backend
from .certificates import (
    ErrorCertificate,
    MikTable,
    bracket_terms,
    certify_continuous,
    certify_impulsive,
    certify_unperturbed,
    initial_condition_bound,
    max_step_for_budget,
    per_step_bracket,
)
from .constants import BoundConstants, estimate_constants, k1_chain
from .driver import (
    ExperimentConfig,
    ExperimentPlan,
    RunResult,
    ShadowOutcome,
    config_from_dict,
    plan_experiment,
    run_experiment,
    shadow_experiment,
    sweep_experiment,
)
from .errors import (
    BlowUp,
    CapTooSmall,
    ConfigError,
    ConstantsInfeasible,
    DomainMismatch,
    InfeasibleBudget,
    NumericalDomainError,
    OracleUnreliable,
    OrderError,
    StepCollapse,
    TaylorCertError,
)
from .fields import (
    FieldSpec,
    LAMBDA_ZERO,
    LambdaSpec,
    builtin_names,
    custom_field,
    custom_lambda,
    make_field,
    make_lambda,
)
from .integrate import (
    NO_PERTURBATION,
    PerturbationSpec,
    Trajectory,
    error_trajectory,
    integrate_reference,
    integrate_truncated,
    local_flow,
    segment_deviation_probe,
)
from .problems import (
    DerivativeStack,
    OdeProblem,
    eval_derivatives,
    eval_field,
    load_problem,
    problem_from_config,
)
from .sampling import (
    SamplingSequence,
    StepBudget,
    aggregate_alt_form,
    build_sampling,
    class_membership,
    closed_form_h_bound,
    compute_aggregate,
    deviation_inequality_h,
    first_exit,
)
from .shadowing import (
    PseudoOrbit,
    ShadowConstraintReport,
    ShadowResult,
    is_pseudo_orbit,
    pseudo_orbit_class,
    shadowing_search,
    verify_shadow_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "BoundConstants",
    "CapTooSmall",
    "ConfigError",
    "ConstantsInfeasible",
    "DerivativeStack",
    "DomainMismatch",
    "ErrorCertificate",
    "ExperimentConfig",
    "ExperimentPlan",
    "FieldSpec",
    "InfeasibleBudget",
    "LAMBDA_ZERO",
    "LambdaSpec",
    "MikTable",
    "NO_PERTURBATION",
    "NumericalDomainError",
    "OdeProblem",
    "OracleUnreliable",
    "OrderError",
    "PerturbationSpec",
    "PseudoOrbit",
    "RunResult",
    "SamplingSequence",
    "ShadowConstraintReport",
    "ShadowOutcome",
    "ShadowResult",
    "StepBudget",
    "StepCollapse",
    "TaylorCertError",
    "Trajectory",
    "active_backend",
    "aggregate_alt_form",
    "bracket_terms",
    "build_sampling",
    "builtin_names",
    "certify_continuous",
    "certify_impulsive",
    "certify_unperturbed",
    "class_membership",
    "closed_form_h_bound",
    "compute_aggregate",
    "config_from_dict",
    "custom_field",
    "custom_lambda",
    "deviation_inequality_h",
    "error_trajectory",
    "estimate_constants",
    "eval_derivatives",
    "eval_field",
    "first_exit",
    "initial_condition_bound",
    "integrate_reference",
    "integrate_truncated",
    "k1_chain",
    "load_problem",
    "local_flow",
    "make_field",
    "make_lambda",
    "max_step_for_budget",
    "per_step_bracket",
    "plan_experiment",
    "problem_from_config",
    "run_experiment",
    "segment_deviation_probe",
    "set_backend",
    "shadow_experiment",
    "shadowing_search",
    "sweep_experiment",
    "verify_shadow_constraints",
]
