"""Distributed optimization of heterogeneous linear agents under
communication delays and Markov-switching digraphs."""

from .errors import (
    DelayOptError,
    DimensionError,
    DivergenceError,
    GeneratorError,
    HistoryUnderflowError,
    HurwitzError,
    InfeasibleBaseError,
    MissingFieldError,
    RankConditionError,
    ReducibleChainError,
    RegulatorError,
    ResourceError,
    SolverUndecidedError,
    ValidationError,
)
from .graph import (
    BoundCheck,
    CutReport,
    ModeDigraph,
    SwitchingTopology,
    UnionMirror,
    check_cut_lower_bound,
    laplacian,
    minimum_cut,
    stationary_weights,
    union_mirror,
)
from .markov import (
    GeneratorMatrix,
    ModePath,
    sample_mode_path,
    stationary_distribution,
    validate_generator,
)
from .objective import (
    CostSet,
    OptimumReport,
    QuadraticCost,
    evaluate_with_gradient,
    global_optimum,
    lipschitz_max,
)
from .plant import (
    AgentModel,
    GainSet,
    RankReport,
    RegulatorSolution,
    check_rank_condition,
    closed_loop_matrix,
    hurwitz_margin,
    regulator_residuals,
    solve_regulator,
    validate_gains,
)
from .protocol import (
    AgentDerivatives,
    AgentState,
    DelayedView,
    ProtocolParams,
    agent_derivatives,
    consensus_errors,
)
from .sim import (
    ConvergenceMetrics,
    DelaySpec,
    HistoryBuffer,
    ResidualReport,
    Scenario,
    Trajectory,
    exact_residual_norms,
    integrate,
    metrics,
    residual_invariant_report,
    stacked_closed_loop,
)
from .lmi import (
    CheckReport,
    DecisionVars,
    FeasibilityCertificate,
    InfeasibilityReport,
    IntegralBoundReport,
    LmiData,
    MarginResult,
    SampledPath,
    assemble_pi,
    build_lmi_data,
    check_certificate,
    delay_margin,
    fix_Pa,
    jensen_bound_check,
    solve_feasibility,
    write_certificate,
)

__version__ = "0.1.0"
