"""Epidemic dynamics with self-interested protection switching.

Susceptible individuals adopt protection, and protected individuals drop
it, at rates set by a behavioural response to the current infection
level.  The package provides the planar mean-field model (including the
set-valued field of the all-or-nothing step response), equilibrium and
stability analysis, event-aware adaptive integration, an exact-jump
stochastic population model, contact-trace driven simulation, and a
command-line front end.
"""

from .model import (
    CONTINUOUS_RESPONSES,
    DOMAIN_SLACK,
    ClassSpec,
    ConstantResponse,
    FieldPoint,
    FieldSegment,
    Interval,
    ModelParams,
    MultiClassState,
    ResponseSpec,
    SigmoidResponse,
    State,
    StepResponse,
    TabulatedResponse,
    eval_response,
    eval_response_arrays,
    eval_response_selected,
    field,
    field_multiclass,
    response_slopes,
)
from .equilibria import (
    Equilibrium,
    EquilibriumKind,
    HypothesisViolated,
    NoRootError,
    SlidingNormalForm,
    StabilityReport,
    SweepRow,
    Verdict,
    endemic_root,
    equilibrium_infection_vs_gamma,
    find_equilibria,
    find_equilibria_continuous,
    find_equilibria_step,
    g_function,
    jacobian,
    sliding_normal_form,
    stability_sliding,
    stability_smooth,
)
from .integrator import (
    DomainError,
    EventKind,
    IntegratorConfig,
    LeftDomainError,
    StepUnderflowError,
    TerminationReason,
    Trajectory,
    classify_basin,
    dulac_scan,
    energy_E,
    integrate,
    integrate_sliding,
    monotone_M,
)
from .ctmc import (
    AgentPopulation,
    SimRun,
    convergence_study,
    simulate_ctmc,
)
from .traces import (
    ContactTrace,
    EmptyTraceError,
    ParseError,
    TraceExperiment,
    TraceResult,
    make_complete_mixing_trace,
    run_trace_experiment,
)
from .config import (
    ConfigError,
    format_value,
    parse_config,
    serialize_config,
)

__version__ = "0.1.0"

__all__ = [
    "CONTINUOUS_RESPONSES",
    "DOMAIN_SLACK",
    "AgentPopulation",
    "ClassSpec",
    "ConfigError",
    "ConstantResponse",
    "ContactTrace",
    "DomainError",
    "EmptyTraceError",
    "Equilibrium",
    "EquilibriumKind",
    "EventKind",
    "FieldPoint",
    "FieldSegment",
    "HypothesisViolated",
    "IntegratorConfig",
    "Interval",
    "LeftDomainError",
    "ModelParams",
    "MultiClassState",
    "NoRootError",
    "ParseError",
    "ResponseSpec",
    "SigmoidResponse",
    "SimRun",
    "SlidingNormalForm",
    "StabilityReport",
    "State",
    "StepResponse",
    "StepUnderflowError",
    "SweepRow",
    "TabulatedResponse",
    "TerminationReason",
    "TraceExperiment",
    "TraceResult",
    "Trajectory",
    "Verdict",
    "classify_basin",
    "convergence_study",
    "dulac_scan",
    "endemic_root",
    "energy_E",
    "equilibrium_infection_vs_gamma",
    "eval_response",
    "eval_response_arrays",
    "eval_response_selected",
    "field",
    "field_multiclass",
    "find_equilibria",
    "find_equilibria_continuous",
    "find_equilibria_step",
    "format_value",
    "g_function",
    "integrate",
    "integrate_sliding",
    "jacobian",
    "make_complete_mixing_trace",
    "monotone_M",
    "parse_config",
    "response_slopes",
    "run_trace_experiment",
    "serialize_config",
    "simulate_ctmc",
    "sliding_normal_form",
    "stability_sliding",
    "stability_smooth",
]
