"""Prox-linear subproblem solvers.

Given a linearized model at x̄ with mapping estimate g̃ and Jacobian estimate
J̃, find argmin_x f(g̃ + J̃(x − x̄)) + h(x) + (M/2)‖x − x̄‖². Closed forms cover
the squared-norm outer (damped Gauss-Newton) and the scalar truncated outer;
everything else goes through projected gradient ascent on the Fenchel dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, SubproblemError
from .model import (
    Regularizer,
    SquaredNorm,
    TruncatedIdentity,
    ZeroRegularizer,
    as_matrix,
    as_vector,
)
from .proxops import (  # noqa: F401  (re-exported: these primitives live here)
    project_linf_ball,
    project_simplex,
    prox_l1,
    spectral_norm,
)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 100_000


@dataclass(frozen=True)
class ProxLinearModel:
    """One linearized model: anchor x̄, estimates (g̃, J̃), penalty M."""

    x_bar: np.ndarray
    g_tilde: np.ndarray
    J_tilde: np.ndarray
    M: float
    outer: object
    reg: Regularizer

    def __post_init__(self):
        object.__setattr__(self, "x_bar", as_vector(self.x_bar, name="x_bar"))
        object.__setattr__(self, "g_tilde", as_vector(self.g_tilde, name="g_tilde"))
        J = as_matrix(self.J_tilde, name="J_tilde")
        if J.shape != (self.g_tilde.size, self.x_bar.size):
            raise ConfigError(
                f"J_tilde shape {J.shape} inconsistent with "
                f"m={self.g_tilde.size}, n={self.x_bar.size}"
            )
        object.__setattr__(self, "J_tilde", J)
        if not (np.isfinite(self.M) and self.M > 0):
            raise ConfigError("ProxLinearModel: M must be positive")

    @property
    def n(self):
        return self.x_bar.size

    @property
    def m(self):
        return self.g_tilde.size


@dataclass(frozen=True)
class SubproblemSolution:
    x_plus: np.ndarray
    dual_y: np.ndarray
    gap: float
    iters: int
    degenerate: bool = field(default=False)


def model_value(model: ProxLinearModel, x) -> float:
    """The M-strongly-convex model objective at x (with the regularizer)."""
    x = as_vector(x, model.n, "x")
    d = x - model.x_bar
    h = model.reg.value(x)
    if not np.isfinite(h):
        return float("inf")
    z = model.g_tilde + model.J_tilde @ d
    return model.outer.value(z) + h + 0.5 * model.M * float(d @ d)


def solve(model: ProxLinearModel, tol: float = DEFAULT_TOL,
          max_iters: int = DEFAULT_MAX_ITERS) -> SubproblemSolution:
    """Solve the model, dispatching to a closed form when one applies."""
    if tol <= 0:
        raise ConfigError("solve: tol must be positive")
    if isinstance(model.reg, ZeroRegularizer):
        if isinstance(model.outer, SquaredNorm):
            return solve_gauss_newton(model)
        if isinstance(model.outer, TruncatedIdentity) and model.m == 1:
            return solve_truncated(model)
    return solve_dual(model, tol, max_iters)


def solve_gauss_newton(model: ProxLinearModel) -> SubproblemSolution:
    """Exact solve for outer = SquaredNorm(coeff), reg = Zero.

    Solves (2c·J̃ᵀJ̃ + M·I) d = −2c·J̃ᵀg̃, using the equivalent m×m system
    d = −2c·J̃ᵀ(M·I + 2c·J̃J̃ᵀ)⁻¹ g̃ when m < n. Both are symmetric positive
    definite for M > 0.
    """
    if not isinstance(model.outer, SquaredNorm) or not isinstance(model.reg, ZeroRegularizer):
        raise ConfigError("solve_gauss_newton requires outer=SquaredNorm, reg=Zero")
    J, g, M = model.J_tilde, model.g_tilde, model.M
    c2 = 2.0 * model.outer.coeff
    if model.m < model.n:
        A = c2 * (J @ J.T) + M * np.eye(model.m)
        d = -c2 * (J.T @ cho_solve(cho_factor(A), g))
    else:
        A = c2 * (J.T @ J) + M * np.eye(model.n)
        d = cho_solve(cho_factor(A), -c2 * (J.T @ g))
    x_plus = model.x_bar + d
    y = c2 * (g + J @ d)
    return SubproblemSolution(x_plus=x_plus, dual_y=y, gap=0.0, iters=0)


def solve_truncated(model: ProxLinearModel) -> SubproblemSolution:
    """Closed form for outer = max{·, floor} with m = 1, reg = Zero.

    x⁺ = x̄ − t·J̃ᵀ with t = clamp(min{1/M, (g̃ − floor)/‖J̃‖²}, ≥ 0). When
    J̃ = 0 and g̃ > floor the model has no usable descent direction; x̄ is
    returned with the degenerate flag set.
    """
    if not isinstance(model.outer, TruncatedIdentity) or model.m != 1:
        raise ConfigError("solve_truncated requires outer=TruncatedIdentity, m=1")
    if not isinstance(model.reg, ZeroRegularizer):
        raise ConfigError("solve_truncated requires reg=Zero")
    row = model.J_tilde[0]
    jac_sq = float(row @ row)
    slack = float(model.g_tilde[0]) - model.outer.floor
    if jac_sq == 0.0:
        degenerate = slack > 0.0
        y = np.array([1.0 if slack > 0.0 else 0.0])
        return SubproblemSolution(x_plus=model.x_bar.copy(), dual_y=y, gap=0.0,
                                  iters=0, degenerate=degenerate)
    t = max(0.0, min(1.0 / model.M, slack / jac_sq))
    x_plus = model.x_bar - t * row
    return SubproblemSolution(x_plus=x_plus, dual_y=np.array([model.M * t]),
                              gap=0.0, iters=0)


def solve_dual(model: ProxLinearModel, tol: float = DEFAULT_TOL,
               max_iters: int = DEFAULT_MAX_ITERS) -> SubproblemSolution:
    """Projected gradient ascent on the Fenchel dual.

    D(y) = ⟨y, g̃⟩ − f*(y) + min_d { ⟨J̃ᵀy, d⟩ + h(x̄+d) + (M/2)‖d‖² }, with
    primal recovery x(y) = prox_{h/M}(x̄ − J̃ᵀy/M). The reported gap is the
    Fenchel-Young residual f(z) + f*(y) − ⟨y, z⟩ at z = g̃ + J̃(x(y) − x̄),
    which is nonnegative and upper-bounds the model suboptimality of x(y).
    """
    J, g, M, outer, reg = model.J_tilde, model.g_tilde, model.M, model.outer, model.reg
    lip = spectral_norm(J) ** 2 / M + float(outer.conj_curvature)
    step = 1.0 / lip if lip > 0.0 else 1.0
    y = outer.conj_project(outer.conj_support(g))
    best = None
    for it in range(max_iters + 1):
        x = reg.prox(model.x_bar - (J.T @ y) / M, 1.0 / M)
        z = g + J @ (x - model.x_bar)
        gap = max(0.0, outer.value(z) + outer.conj_value(y) - float(y @ z))
        if best is None or gap < best.gap:
            best = SubproblemSolution(x_plus=x, dual_y=y.copy(), gap=gap, iters=it)
        if gap <= tol:
            return best
        y = outer.conj_project(y + step * (z - outer.conj_grad(y)))
    raise SubproblemError(
        f"dual solve: gap {best.gap:.3e} above tol {tol:.3e} after {max_iters} iterations",
        best=best,
    )
