"""Algorithm drivers and batch-size schedules.

Implements the variance-reduced prox-linear loop (epoch anchors + inner
estimator updates), the simple mini-batch prox-linear method, the
deterministic full-batch method, and constructors that evaluate the published
schedule formulas for each operating regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SubproblemError
from .estimators import BatchSpec, EstimatorState, anchor_reset, inner_update
from .model import (
    CompositeProblem,
    FiniteSum,
    SimplexIndicator,
    SmoothnessConstants,
    as_vector,
)
from .subproblem import ProxLinearModel, solve


def _ceil_int(v: float, minimum: int = 1) -> int:
    """Ceiling with a relative guard so formula values that are integers in
    exact arithmetic do not round up from floating-point dust."""
    c = math.ceil(v - 1e-9 * max(1.0, abs(v)))
    return max(minimum, int(c))


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Epoch/batch plan for one run.

    tau and the inner batch sizes may be single integers or per-epoch
    sequences of length K (the adaptive mode uses growing lists). Anchor
    batches are per-epoch scalars for every published schedule.
    """

    K: int
    tau: object
    anchor_batch_g: object
    anchor_batch_j: object
    inner_batch_g: object
    inner_batch_j: object
    M: float
    epsilon: float | None = None
    shared: bool | None = field(default=None)

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("Schedule: K must be >= 1")
        if not (np.isfinite(self.M) and self.M > 0):
            raise ConfigError("Schedule: M must be positive")
        for name in ("tau", "anchor_batch_g", "anchor_batch_j",
                     "inner_batch_g", "inner_batch_j"):
            raw = getattr(self, name)
            values = self._expand(raw)
            if len(values) != self.K:
                raise ConfigError(f"Schedule: {name} list must have length K={self.K}")
            if any(int(v) < 1 for v in values):
                raise ConfigError(f"Schedule: {name} entries must be >= 1")

    def _expand(self, raw):
        if isinstance(raw, (int, np.integer)):
            return [int(raw)] * self.K
        return [int(v) for v in raw]

    def tau_at(self, k: int) -> int:
        return self._expand(self.tau)[k - 1]

    def anchor_at(self, k: int) -> tuple[int, int]:
        return (self._expand(self.anchor_batch_g)[k - 1],
                self._expand(self.anchor_batch_j)[k - 1])

    def inner_at(self, k: int) -> tuple[int, int]:
        return (self._expand(self.inner_batch_g)[k - 1],
                self._expand(self.inner_batch_j)[k - 1])

    def total_inner(self) -> int:
        return sum(self.tau_at(k) for k in range(1, self.K + 1))


def schedule_implied_calls(schedule: Schedule, scheme: str) -> tuple[int, int]:
    """Exact oracle-call totals a run of this schedule must report.

    Epoch structure (svrg_corrected / sarah): one anchor plus tau-1 inner
    estimator updates per epoch; sarah inner updates evaluate each batch at
    two points. mini_batch builds a fresh estimate at every one of the
    tau iterations and has no anchors. full_batch evaluates the full data
    every iteration.
    """
    g = j = 0
    for k in range(1, schedule.K + 1):
        tau = schedule.tau_at(k)
        bg, bj = schedule.inner_at(k)
        ag, aj = schedule.anchor_at(k)
        if scheme in ("svrg_corrected", "sarah"):
            mult = 2 if scheme == "sarah" else 1
            g += ag + (tau - 1) * bg * mult
            j += aj + (tau - 1) * bj * mult
        elif scheme == "mini_batch":
            g += tau * bg
            j += tau * bj
        elif scheme == "full_batch":
            g += tau * ag
            j += tau * aj
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
    return g, j


# ---------------------------------------------------------------------------
# Run results and the main loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    output_x: np.ndarray
    final_x: np.ndarray
    trace: tuple
    total_calls_g: int
    total_calls_j: int
    seed: int


def default_start(problem: CompositeProblem) -> np.ndarray:
    """Zeros, except uniform weights on simplex-constrained coordinates so the
    start is always feasible."""
    x = np.zeros(problem.n)
    if isinstance(problem.reg, SimplexIndicator):
        x[: problem.reg.dim] = 1.0 / problem.reg.dim
    return x


def _draw_output_cell(rng, schedule: Schedule) -> tuple[int, int]:
    """Uniform (epoch, inner-index) cell over the iteration grid; inner index
    i refers to the iterate x^k_i *before* the i-th step of epoch k."""
    total = schedule.total_inner()
    flat = int(rng.integers(0, total))
    for k in range(1, schedule.K + 1):
        tau = schedule.tau_at(k)
        if flat < tau:
            return k, flat
        flat -= tau
    raise AssertionError("unreachable: flat index inside total")


def _step(problem, x, est, M, tol, max_iters, where):
    model = ProxLinearModel(x_bar=x, g_tilde=est.g_tilde, J_tilde=est.J_tilde,
                            M=M, outer=problem.outer, reg=problem.reg)
    try:
        return solve(model, tol=tol, max_iters=max_iters).x_plus
    except SubproblemError as exc:
        raise SubproblemError(f"{where}: {exc}", best=exc.best) from exc


def run_svr_pl(problem: CompositeProblem, scheme: str, schedule: Schedule,
               seed: int, hook=None, x0=None, tol: float = 1e-9,
               max_iters: int = 100_000) -> RunResult:
    """Epoch-anchored variance-reduced prox-linear run.

    scheme is "svrg_corrected" or "sarah". The first generator draw selects
    the uniformly random output cell (k*, i*); the run then stores x^{k*}_{i*}
    when it passes through it. Batch sharing follows the scheme default
    (shared for svrg_corrected, independent for sarah) unless the schedule
    pins it.
    """
    if scheme not in ("svrg_corrected", "sarah"):
        raise ConfigError("run_svr_pl: scheme must be 'svrg_corrected' or 'sarah'")
    x = as_vector(default_start(problem) if x0 is None else x0, problem.n, "x0")
    rng = np.random.default_rng(seed)
    k_star, i_star = _draw_output_cell(rng, schedule)
    shared = schedule.shared if schedule.shared is not None else scheme == "svrg_corrected"
    state = EstimatorState(scheme, rng)
    M = schedule.M
    calls_g = calls_j = 0
    output_x = None
    if hook is not None:
        hook(1, 0, 0, 0, (lambda v=x: v.copy()), False)
    for k in range(1, schedule.K + 1):
        tau = schedule.tau_at(k)
        ag, aj = schedule.anchor_at(k)
        bg, bj = schedule.inner_at(k)
        est = anchor_reset(state, problem, x, BatchSpec(ag, aj, shared=False))
        calls_g += est.calls_g
        calls_j += est.calls_j
        for i in range(tau):
            if k == k_star and i == i_star:
                output_x = x.copy()
            x = _step(problem, x, est, M, tol, max_iters, f"epoch {k} inner {i}")
            if hook is not None:
                is_last = k == schedule.K and i == tau - 1
                hook(k, i + 1, calls_g, calls_j, (lambda v=x: v.copy()), is_last)
            if i + 1 < tau:
                est = inner_update(state, problem, x, BatchSpec(bg, bj, shared=shared))
                calls_g += est.calls_g
                calls_j += est.calls_j
    trace = tuple(getattr(hook, "records", ()) or ())
    return RunResult(output_x=output_x, final_x=x.copy(), trace=trace,
                     total_calls_g=calls_g, total_calls_j=calls_j, seed=int(seed))


def run_minibatch_pl(problem: CompositeProblem, schedule: Schedule, seed: int,
                     hook=None, x0=None, tol: float = 1e-9,
                     max_iters: int = 100_000) -> RunResult:
    """Simple mini-batch prox-linear: a fresh estimate every iteration.

    Uses schedule epochs flattened to T = total_inner() iterations (the
    published schedule has K=1, tau=T). Output is uniform over the T
    pre-step iterates x_0 .. x_{T-1}.
    """
    x = as_vector(default_start(problem) if x0 is None else x0, problem.n, "x0")
    rng = np.random.default_rng(seed)
    k_star, i_star = _draw_output_cell(rng, schedule)
    state = EstimatorState("mini_batch", rng)
    M = schedule.M
    calls_g = calls_j = 0
    output_x = None
    if hook is not None:
        hook(1, 0, 0, 0, (lambda v=x: v.copy()), False)
    for k in range(1, schedule.K + 1):
        tau = schedule.tau_at(k)
        bg, bj = schedule.inner_at(k)
        shared = bool(schedule.shared) if schedule.shared is not None else False
        for i in range(tau):
            if k == k_star and i == i_star:
                output_x = x.copy()
            est = inner_update(state, problem, x, BatchSpec(bg, bj, shared=shared))
            calls_g += est.calls_g
            calls_j += est.calls_j
            x = _step(problem, x, est, M, tol, max_iters, f"epoch {k} inner {i}")
            if hook is not None:
                is_last = k == schedule.K and i == tau - 1
                hook(k, i + 1, calls_g, calls_j, (lambda v=x: v.copy()), is_last)
    trace = tuple(getattr(hook, "records", ()) or ())
    return RunResult(output_x=output_x, final_x=x.copy(), trace=trace,
                     total_calls_g=calls_g, total_calls_j=calls_j, seed=int(seed))


def run_deterministic_pl(problem: CompositeProblem, M: float, T: int,
                         hook=None, x0=None, tol: float = 1e-9,
                         max_iters: int = 100_000) -> RunResult:
    """T full-batch prox-linear steps (no randomness; output = final iterate)."""
    if T < 1:
        raise ConfigError("run_deterministic_pl: T must be >= 1")
    x = as_vector(default_start(problem) if x0 is None else x0, problem.n, "x0")
    state = EstimatorState("full_batch", np.random.default_rng(0))
    full = problem.regime.full_tokens()
    if full is None:
        raise ConfigError("run_deterministic_pl needs a population-backed regime")
    n_full = len(full)
    calls_g = calls_j = 0
    if hook is not None:
        hook(1, 0, 0, 0, (lambda v=x: v.copy()), False)
    for i in range(T):
        est = inner_update(state, problem, x, BatchSpec(n_full, n_full))
        calls_g += est.calls_g
        calls_j += est.calls_j
        x = _step(problem, x, est, M, tol, max_iters, f"iteration {i}")
        if hook is not None:
            hook(1, i + 1, calls_g, calls_j, (lambda v=x: v.copy()), i == T - 1)
    trace = tuple(getattr(hook, "records", ()) or ())
    return RunResult(output_x=x.copy(), final_x=x.copy(), trace=trace,
                     total_calls_g=calls_g, total_calls_j=calls_j, seed=0)


# ---------------------------------------------------------------------------
# Published schedules
# ---------------------------------------------------------------------------

def _resolve_K(K, gap, epsilon, tau, coeff) -> int:
    """K directly if given; else ceil(coeff * gap / (epsilon * tau)) from a
    caller-supplied objective-gap estimate; else 1."""
    if K is not None:
        if K < 1:
            raise ConfigError("K must be >= 1")
        return int(K)
    if gap is not None:
        return _ceil_int(coeff * gap / (epsilon * tau))
    return 1


def _need(constants: SmoothnessConstants, names) -> None:
    missing = [n for n in names if getattr(constants, n) is None]
    if missing:
        raise ConfigError(f"schedule needs constants {missing}")


def _default_M(constants: SmoothnessConstants, smooth: bool = False):
    if not smooth and constants.ell_f is not None and constants.L_g is not None \
            and constants.ell_f * constants.L_g > 0:
        return 4.0 * constants.ell_f * constants.L_g
    L = constants.L_fog
    if L is not None and L > 0:
        return 4.0 * L
    raise ConfigError("cannot derive a default M from the documented constants; pass M")


def schedule_svrg_finite(N: int, epsilon: float, M: float, gap=None, K=None) -> Schedule:
    """Finite-sum schedule for the first-order-corrected estimator:
    tau = ceil(N^(1/5)/2 - 1) (clamped to 1), B = ceil(4 N^(4/5)),
    S = ceil(N^(2/5)), anchors = N; K from a 15*M*gap/(epsilon*tau) bound
    when a gap estimate is supplied.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    tau = _ceil_int(0.5 * N ** 0.2 - 1.0)
    B = _ceil_int(4.0 * N ** 0.8)
    S = _ceil_int(N ** 0.4)
    return Schedule(K=_resolve_K(K, gap, epsilon, tau, 15.0 * M), tau=tau,
                    anchor_batch_g=N, anchor_batch_j=N,
                    inner_batch_g=B, inner_batch_j=S, M=M, epsilon=epsilon,
                    shared=True)


def schedule_minibatch(constants: SmoothnessConstants, epsilon: float,
                       M=None, T=None, gap=None) -> Schedule:
    """Single-loop mini-batch schedule: B = ceil(36 ell_f^2 sigma_g^2 / eps^2),
    S = ceil(2 ell_f sigma_gprime^2 / (L_g eps)), T iterations.
    """
    _need(constants, ("ell_f", "sigma_g", "sigma_gprime", "L_g"))
    B = _ceil_int(36.0 * constants.ell_f**2 * constants.sigma_g**2 / epsilon**2)
    S = _ceil_int(2.0 * constants.ell_f * constants.sigma_gprime**2
                  / (constants.L_g * epsilon))
    if M is None:
        M = _default_M(constants)
    if T is None:
        T = _ceil_int(gap / epsilon) if gap is not None else 1
    return Schedule(K=1, tau=int(T), anchor_batch_g=B, anchor_batch_j=S,
                    inner_batch_g=B, inner_batch_j=S, M=M, epsilon=epsilon)


def schedule_sarah_expect_nonsmooth(constants: SmoothnessConstants, epsilon: float,
                                    M=None, gap=None, K=None) -> Schedule:
    """Expectation-regime recursive-estimator schedule (nonsmooth outer):
    tau = ceil(eps^-1/2), anchors B0 = ceil(25 ell_f^2 sigma_g^2 / (4 eps^2)),
    S0 = ceil(3 ell_f sigma_gprime^2 / (4 L_g M eps)), inner
    b = ceil(25 ell_f^2 ell_g^2 / (M eps^3/2)), s = ceil(12 ell_f L_g / (M eps^1/2)).
    """
    _need(constants, ("ell_f", "ell_g", "L_g", "sigma_g", "sigma_gprime"))
    if M is None:
        M = _default_M(constants)
    c = constants
    tau = _ceil_int(epsilon ** -0.5)
    B0 = _ceil_int(25.0 * c.ell_f**2 * c.sigma_g**2 / (4.0 * epsilon**2))
    S0 = _ceil_int(3.0 * c.ell_f * c.sigma_gprime**2 / (4.0 * c.L_g * M * epsilon))
    b = _ceil_int(25.0 * c.ell_f**2 * c.ell_g**2 / (M * epsilon**1.5))
    s = _ceil_int(12.0 * c.ell_f * c.L_g / (M * epsilon**0.5))
    return Schedule(K=_resolve_K(K, gap, epsilon, tau, 1.0), tau=tau,
                    anchor_batch_g=B0, anchor_batch_j=S0,
                    inner_batch_g=b, inner_batch_j=s, M=M, epsilon=epsilon)


def schedule_sarah_finite_smooth(N: int, epsilon: float, M: float,
                                 gap=None, K=None) -> Schedule:
    """Finite-sum recursive-estimator schedule (smooth outer): tau = ceil(sqrt N),
    exact anchors, both inner batches 2*ceil(sqrt N); K from
    24*M*gap/(epsilon*tau) when a gap estimate is supplied.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    root = _ceil_int(math.sqrt(N))
    batch = 2 * root
    return Schedule(K=_resolve_K(K, gap, epsilon, root, 24.0 * M), tau=root,
                    anchor_batch_g=N, anchor_batch_j=N,
                    inner_batch_g=batch, inner_batch_j=batch, M=M, epsilon=epsilon)


def schedule_sarah_expect_smooth(constants: SmoothnessConstants, epsilon: float,
                                 M=None, gap=None, K=None) -> Schedule:
    """Expectation-regime recursive-estimator schedule (smooth outer):
    tau = ceil(eps^-1/2), anchors B0 = ceil(11 L_f sigma_g^2 / (4 eps)),
    S0 = ceil(3 ell_f^2 sigma_gprime^2 / (2 L_g eps)), inner batches
    2*ceil(eps^-1/2).
    """
    _need(constants, ("L_f", "ell_f", "L_g", "sigma_g", "sigma_gprime"))
    if M is None:
        M = _default_M(constants, smooth=True)
    c = constants
    tau = _ceil_int(epsilon ** -0.5)
    B0 = _ceil_int(11.0 * c.L_f * c.sigma_g**2 / (4.0 * epsilon))
    S0 = _ceil_int(3.0 * c.ell_f**2 * c.sigma_gprime**2 / (2.0 * c.L_g * epsilon))
    return Schedule(K=_resolve_K(K, gap, epsilon, tau, 1.0), tau=tau,
                    anchor_batch_g=B0, anchor_batch_j=S0,
                    inner_batch_g=2 * tau, inner_batch_j=2 * tau,
                    M=M, epsilon=epsilon)


def schedule_adaptive(constants: SmoothnessConstants, K: int, M=None) -> Schedule:
    """Adaptive accuracy ladder: epoch k targets eps_k = k^-2, giving
    tau_k = k, inner batches 2k, and anchors from the smooth expectation
    formulas evaluated at eps_k. Total inner iterations = K(K+1)/2.
    """
    if K < 1:
        raise ConfigError("K must be >= 1")
    _need(constants, ("L_f", "ell_f", "L_g", "sigma_g", "sigma_gprime"))
    if M is None:
        M = _default_M(constants, smooth=True)
    c = constants
    taus, B0s, S0s, bs = [], [], [], []
    for k in range(1, K + 1):
        eps_k = float(k) ** -2
        taus.append(k)
        B0s.append(_ceil_int(11.0 * c.L_f * c.sigma_g**2 / (4.0 * eps_k)))
        S0s.append(_ceil_int(3.0 * c.ell_f**2 * c.sigma_gprime**2 / (2.0 * c.L_g * eps_k)))
        bs.append(2 * k)
    return Schedule(K=K, tau=tuple(taus), anchor_batch_g=tuple(B0s),
                    anchor_batch_j=tuple(S0s), inner_batch_g=tuple(bs),
                    inner_batch_j=tuple(bs), M=M, epsilon=None)
