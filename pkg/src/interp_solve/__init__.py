"""Relaxed approximate proximal point, Lookahead and extragradient-type
solvers for inclusion problems ``0 in A z + F z`` with possibly nonmonotone
``F``, plus checks of their convergence guarantees."""

from .core import (
    Box,
    BudgetExceeded,
    ConvergenceError,
    DiagnosticsError,
    DimensionError,
    DivergenceError,
    EstimationError,
    EvalBudget,
    Identity,
    InterpSolveError,
    ParameterError,
    ParseError,
    ResolventMap,
    StochasticOracle,
    UnsupportedError,
    VectorField,
    oracle_eval,
    resolvent_apply,
)
from .problems import (
    ProblemSpec,
    estimate_comonotonicity,
    estimate_lipschitz,
    estimate_star_rho,
    forsaken_field,
    linear_field,
    lne_forsaken_field,
    make_problem,
    polar_game_field,
    quadratic_field,
    quadratic_from_constants,
)
from .solvers import (
    SolverParams,
    Trajectory,
    approx_prox,
    batch_schedule,
    cegplus_step,
    eg_step,
    egplus_step,
    fbf_step,
    gda_step,
    km_iterate,
    la_gda_tau2_closed_form,
    lookahead_run,
    rapp_run,
    relaxed_pp_run,
    run_solver,
    tau_schedule,
)

__version__ = "0.1.0"
