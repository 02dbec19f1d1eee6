"""Minimisation of divergence-type objectives over mixture families.

The core iteration alternates an exponential reweighting ``F3`` with an
m-projection onto the feasible mixture family.  Channel capacity, error
exponents, wiretap and commitment capacities, em problems and the
information bottleneck are provided as ready-made instances.
"""

from .info import (
    as_distribution,
    conditional_entropy,
    entropy,
    kl_divergence,
    renyi_divergence,
    restrict_support,
)
from .family import (
    DualSolveReport,
    ExponentialFamily,
    InfeasibleFamilyError,
    MarginalFamily,
    MixtureFamily,
    ProjectionWarning,
    dual_potential,
    e_projection,
    independent_subset,
    m_projection,
    mixture_coordinates,
    solve_dual,
)
from .solver import (
    TRACE_COLUMNS,
    ConditionReport,
    DivergenceError,
    IdentityReport,
    IterationTrace,
    PsiOracle,
    SolveResult,
    SolverConfig,
    Status,
    check_conditions,
    d_psi,
    estimate_lipschitz,
    extended_objective,
    f3_map,
    solve_approx,
    solve_exact,
    solve_gradient_combo,
    solve_with_restarts,
    verify_iteration_identities,
)
from .problems import (
    Channel,
    JointSource,
    ProblemInstance,
    Sign,
    channel_capacity,
    commitment_capacity,
    em_problem,
    information_bottleneck,
    reliability_exponent,
    reverse_em,
    run_instance,
    strong_converse_exponent,
    wiretap_degraded,
    wiretap_general,
    with_cost_constraint,
)

__version__ = "0.1.0"
