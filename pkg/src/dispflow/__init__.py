"""dispflow: vector fields as near-identity displacement maps.

A field is represented by the map that moves every point one scale-sized
step; flows are literal iterations of that map, brackets are iterated
commutators, regularity is measured by finite differences, and every
asymptotic claim is settled by a scale sweep with declared tolerances.
"""

from .charts import (
    Box,
    Prevector,
    Transition,
    act_on_function,
    as_point,
    conjugate_prevector_field,
    differential,
    identity_transition,
    pushforward_field,
)
from .errors import (
    AllZero,
    ArityMismatch,
    BoundViolation,
    ConfigError,
    Diverging,
    DispflowError,
    DomainError,
    DomainExit,
    DslError,
    FieldSyntaxError,
    InverseDiverged,
    NotCommuting,
    NotIndependent,
    RangeOverflow,
    TooFewPoints,
    UnknownIdentifier,
)
from .fields import (
    ClassicalField,
    FieldFamily,
    PrevectorField,
    RegularityEstimate,
    check_equivalence,
    check_realization,
    compose,
    d1_sweep,
    d2_sweep,
    estimate_constants,
    finite_difference,
    identity_field,
    invert,
    prevector_sweep,
    realize_classical,
    realized_family,
)
from .flow import (
    BoundReport,
    FlowTrajectory,
    canonical_family,
    canonical_representative,
    check_linearization,
    compare_flows,
    flow,
    flow_prevector,
    flow_trajectory,
    rescaled_compare,
    standard_flow,
    verify_contraction_bounds,
)
from .bracket import (
    BracketReport,
    CommutationReport,
    bracket_via_scaling,
    check_bracket_realizes_classical,
    check_commutation,
    check_straightening,
    classical_bracket,
    commutator,
    flow_limit_bracket,
    lie_bracket,
    straighten,
)
from .order import (
    APPROX,
    FAILS,
    INCONCLUSIVE,
    PREC,
    PREC_PREC,
    OrderFit,
    OrderVerdict,
    Scale,
    SweepPlan,
    as_rational,
    fit_order,
    judge,
    judge_approx,
    shadow,
    sweep_verdict,
)
from .scenarios import (
    PendulumParams,
    PendulumReport,
    ReportBundle,
    ScenarioConfig,
    load_scenario,
    run_pendulum,
    run_scenario,
)

__version__ = "0.1.0"
