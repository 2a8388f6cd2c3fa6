"""Sparse multi-type random graphs: simulation, compound Poisson census laws
and quadratic fluctuation rate functions."""

from __future__ import annotations

__version__ = "0.1.0"

from .connectivity import ConnBounds, ConnProbResult, p_conn_bounds, p_conn_brute, p_conn_exact
from .cpp import (
    JumpLaw,
    LimitJumpLaw,
    RepresentationReport,
    census_law_brute,
    census_law_exact,
    jump_law,
    jump_weight,
    limit_jump_law,
    sample_cpp,
    terminal_prob_convolution,
    terminal_prob_formula,
    verify_representation,
)
from .graphsim import (
    ComponentCensus,
    CensusStats,
    GraphSample,
    UnionFind,
    census,
    run_batch,
    sample_graph,
    sample_gw,
)
from .model import (
    CriticalityReport,
    DualSolution,
    Model,
    ModelSpec,
    criticality,
    kappa_sup,
    make_model,
    moment_condition,
    sigma,
    solve_dual,
    validate_model,
)
from .rates import (
    KRateContext,
    RateContext,
    build_context,
    cgf_check,
    cpp_rates,
    k_context,
    predicted_covariances,
    rate_I,
    rate_i,
    rate_i_sub,
    rate_J,
    rate_J_sub,
)
from .trees import ClusterWeight, MassIdentities, h_value, mass_identities, phi_closed, tau_enum, tau_log

__all__ = [
    "build_context",
    "census",
    "census_law_brute",
    "census_law_exact",
    "CensusStats",
    "cgf_check",
    "ClusterWeight",
    "ComponentCensus",
    "ConnBounds",
    "ConnProbResult",
    "cpp_rates",
    "criticality",
    "CriticalityReport",
    "DualSolution",
    "GraphSample",
    "h_value",
    "jump_law",
    "jump_weight",
    "JumpLaw",
    "k_context",
    "kappa_sup",
    "KRateContext",
    "limit_jump_law",
    "LimitJumpLaw",
    "make_model",
    "mass_identities",
    "MassIdentities",
    "Model",
    "ModelSpec",
    "moment_condition",
    "p_conn_bounds",
    "p_conn_brute",
    "p_conn_exact",
    "phi_closed",
    "predicted_covariances",
    "rate_I",
    "rate_i",
    "rate_i_sub",
    "rate_J",
    "rate_J_sub",
    "RateContext",
    "RepresentationReport",
    "run_batch",
    "sample_cpp",
    "sample_graph",
    "sample_gw",
    "sigma",
    "solve_dual",
    "tau_enum",
    "tau_log",
    "terminal_prob_convolution",
    "terminal_prob_formula",
    "UnionFind",
    "validate_model",
    "verify_representation",
]
