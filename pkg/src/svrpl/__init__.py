"""Stochastic variance-reduced prox-linear methods for composite objectives
f(g(x)) + h(x), with exact subproblem solvers, oracle-call accounting, and a
small experiment harness."""

from .driver import (
    RunResult,
    Schedule,
    run_deterministic_pl,
    run_minibatch_pl,
    run_svr_pl,
    schedule_adaptive,
    schedule_implied_calls,
    schedule_minibatch,
    schedule_sarah_expect_nonsmooth,
    schedule_sarah_expect_smooth,
    schedule_sarah_finite_smooth,
    schedule_svrg_finite,
)
from .errors import ConfigError, DataError, NumericalError, SubproblemError, SvrplError
from .estimators import BatchSpec, EstimateOut, EstimatorState, anchor_reset, inner_update
from .metrics import (
    TraceCollector,
    TraceRecord,
    approx_gradient_mapping,
    emit_trace,
    exact_gradient_mapping,
    read_trace,
)
from .model import (
    AffinePlusHinge,
    CallableOracle,
    ComponentOracle,
    CompositeProblem,
    EuclideanNorm,
    Expectation,
    FiniteSum,
    L1Norm,
    L1Regularizer,
    MaxCoordinate,
    Regularizer,
    SimplexIndicator,
    SmoothnessConstants,
    SquaredNorm,
    TruncatedIdentity,
    ZeroRegularizer,
    full_average_jacobian,
    full_average_map,
    objective_value,
)
from .subproblem import (
    ProxLinearModel,
    SubproblemSolution,
    model_value,
    project_linf_ball,
    project_simplex,
    prox_l1,
    solve,
    solve_dual,
    solve_gauss_newton,
    solve_truncated,
    spectral_norm,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
