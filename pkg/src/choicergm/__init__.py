"""Choice-based network dynamics and equilibrium ERGMs."""

__version__ = "0.1.0"

from .control import (
    ControlStructure,
    DegenerateRuleError,
    ProsphoricArray,
    ResolutionRule,
    edge_multiplicity,
    log_multiplicity,
    norm_shift_offset,
    preimage_count,
    resolve,
)
from .dynamics import (
    Chain,
    ChainConfig,
    EquilibriumDistribution,
    UpdateEvent,
    UpdateSchedule,
    choice_step,
    exact_equilibrium,
    gibbs_step,
    run_choice_process,
    simulate,
    stationary_oracle,
)
from .estimation import (
    AdequacyReport,
    DegeneracyError,
    FitResult,
    SAConfig,
    adequacy_check,
    build_design,
    mple,
    stochastic_approx_mle,
    tune_lambda,
)
from .estimator import ERGM
from .experiments import (
    PerturbationSpec,
    SweepResult,
    SweepSpec,
    local_stability_check,
    norm_shift_surface,
    run_counterfactual,
    run_sweep,
)
from .graph import EdgeVariable, Graph, GraphSupport, SupportTooLargeError, enumerate_graphs
from .model import (
    ModelSpec,
    NodeData,
    ReferenceMeasure,
    TermSpec,
    change_stat,
    compute_stats,
    conditional_edge_prob,
    descriptives,
    graph_potential,
)

__all__ = [
    "__version__",
    "ControlStructure",
    "DegenerateRuleError",
    "ProsphoricArray",
    "ResolutionRule",
    "edge_multiplicity",
    "log_multiplicity",
    "norm_shift_offset",
    "preimage_count",
    "resolve",
    "Chain",
    "ChainConfig",
    "EquilibriumDistribution",
    "UpdateEvent",
    "UpdateSchedule",
    "choice_step",
    "exact_equilibrium",
    "gibbs_step",
    "run_choice_process",
    "simulate",
    "stationary_oracle",
    "AdequacyReport",
    "DegeneracyError",
    "FitResult",
    "SAConfig",
    "adequacy_check",
    "build_design",
    "mple",
    "stochastic_approx_mle",
    "tune_lambda",
    "PerturbationSpec",
    "SweepResult",
    "SweepSpec",
    "local_stability_check",
    "norm_shift_surface",
    "run_counterfactual",
    "run_sweep",
    "ModelSpec",
    "NodeData",
    "ReferenceMeasure",
    "TermSpec",
    "change_stat",
    "compute_stats",
    "conditional_edge_prob",
    "descriptives",
    "graph_potential",
    "ERGM",
    "EdgeVariable",
    "Graph",
    "GraphSupport",
    "SupportTooLargeError",
    "enumerate_graphs",
]
