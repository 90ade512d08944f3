"""Clustered device-to-device caching: analysis, simulation, optimization.

Models a network whose devices form Gaussian clusters around Poisson
parent points, cache content according to a probabilistic placement
policy, and serve cluster neighbors over D2D links with joint
transmission from every device holding the requested file. The package
evaluates the offloading probability analytically (exact cluster-process
interference transform and a closed-form lower bound), validates it by
Monte Carlo simulation, and optimizes the caching vector under a
per-device budget.
"""

from .analytic import (
    CoverageResult,
    NumericalError,
    QuadratureSpec,
    compute_Z,
    coverage_content,
    coverage_given_k,
    gamma_function,
    laplace_exact,
    laplace_fn_exact,
    laplace_fn_ppp,
    laplace_ppp_bound,
    offloading_closed_form_k1,
    offloading_gain,
    rician_pdf,
    zeta_kernel,
)
from .cli import RunSettings, emit_results, load_config, main, parse_quantity
from .experiments import EXPERIMENTS, ExperimentSpec, policy_entropy, run_experiment
from .model import (
    CachingPolicy,
    ContentLibrary,
    NetworkConfig,
    policy_cpf,
    policy_uniform,
    policy_zipf_proportional,
    require_valid_policy,
    validate_policy,
    zipf_popularity,
)
from .optimizer import (
    KktSolution,
    concavity_report,
    grid_search_oracle,
    marginal_gain,
    solve_c_given_v,
    solve_p1,
)
from .simulator import (
    OUTCOME_CLUSTER_MISS,
    OUTCOME_D2D_SIR_FAIL,
    OUTCOME_D2D_SUCCESS,
    OUTCOME_LOCAL_HIT,
    OUTCOMES,
    MonteCarloEstimate,
    TcpRealization,
    attach_caches,
    default_sim_radius,
    estimate_coverage,
    estimate_offloading,
    sample_network,
    simulate_request,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "NetworkConfig",
    "ContentLibrary",
    "CachingPolicy",
    "zipf_popularity",
    "validate_policy",
    "require_valid_policy",
    "policy_cpf",
    "policy_uniform",
    "policy_zipf_proportional",
    # analytic
    "QuadratureSpec",
    "CoverageResult",
    "NumericalError",
    "gamma_function",
    "rician_pdf",
    "zeta_kernel",
    "laplace_exact",
    "laplace_ppp_bound",
    "laplace_fn_exact",
    "laplace_fn_ppp",
    "coverage_given_k",
    "coverage_content",
    "compute_Z",
    "offloading_gain",
    "offloading_closed_form_k1",
    # optimizer
    "KktSolution",
    "marginal_gain",
    "solve_c_given_v",
    "solve_p1",
    "grid_search_oracle",
    "concavity_report",
    # simulator
    "TcpRealization",
    "MonteCarloEstimate",
    "OUTCOMES",
    "OUTCOME_LOCAL_HIT",
    "OUTCOME_D2D_SUCCESS",
    "OUTCOME_D2D_SIR_FAIL",
    "OUTCOME_CLUSTER_MISS",
    "default_sim_radius",
    "sample_network",
    "attach_caches",
    "simulate_request",
    "estimate_coverage",
    "estimate_offloading",
    # experiments / cli
    "EXPERIMENTS",
    "ExperimentSpec",
    "run_experiment",
    "policy_entropy",
    "RunSettings",
    "parse_quantity",
    "load_config",
    "emit_results",
    "main",
]
