"""Built-in problem instances: the four-loss classification mapping, its
smooth squared-norm variant, the smoothed-CVaR portfolio problem, and small
synthetic toys with hand-checkable solutions.

Every instance documents its smoothness constants; the check functions at the
bottom verify Jacobians against central finite differences and constants
against empirical difference quotients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .model import (
    AffinePlusHinge,
    CallableOracle,
    ComponentOracle,
    CompositeProblem,
    EuclideanNorm,
    FiniteSum,
    L1Norm,
    L1Regularizer,
    MaxCoordinate,
    SimplexIndicator,
    SmoothnessConstants,
    SquaredNorm,
    TruncatedIdentity,
    ZeroRegularizer,
    as_matrix,
    full_average_jacobian,
    full_average_map,
    objective_value,
)

# ---------------------------------------------------------------------------
# Four-loss mapping: rows evaluated at the margin z = b * <a, x>
# ---------------------------------------------------------------------------

# Suprema of |d/dz loss_r| and |d²/dz² loss_r| over all z (rounded up where
# irrational): slope sups are exact at z=0 / sigma=1/3 / z=-1/2 / z-1=±1;
# curvature sups at tanh z = 1/sqrt 3 / sigma=(9+sqrt 33)/24 / numerically
# 0.0923718 / z=1.
LOSS_SLOPE_SUP = np.array([1.0, 8.0 / 27.0, 0.2449187, 1.0])
LOSS_CURV_SUP = np.array([4.0 / (3.0 * np.sqrt(3.0)), 0.154059, 0.092372, 2.0])
LOSS_SLOPE_NORM = float(np.linalg.norm(LOSS_SLOPE_SUP))
LOSS_CURV_NORM = float(np.linalg.norm(LOSS_CURV_SUP))


def loss_values(z):
    """The four classification losses at margin(s) z, shape z.shape + (4,)."""
    z = np.asarray(z, dtype=np.float64)
    sig_neg = expit(-z)
    vals = np.stack([
        1.0 - np.tanh(z),
        sig_neg**2,
        np.logaddexp(0.0, -z) - np.logaddexp(0.0, -z - 1.0),
        np.log1p((z - 1.0) ** 2),
    ], axis=-1)
    return vals


def loss_slopes(z):
    """d/dz of the four losses, shape z.shape + (4,)."""
    z = np.asarray(z, dtype=np.float64)
    th = np.tanh(z)
    sig = expit(z)
    u = z - 1.0
    return np.stack([
        -(1.0 - th**2),
        -2.0 * sig * expit(-z) ** 2,
        sig - expit(z + 1.0),
        2.0 * u / (1.0 + u**2),
    ], axis=-1)


class MultiLossOracle(ComponentOracle):
    """Component j maps x to the four losses at z_j = b_j * <a_j, x>."""

    def __init__(self, A, b):
        A = as_matrix(A, name="features")
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if b.size != A.shape[0]:
            raise ConfigError("labels and feature rows disagree in length")
        if not np.all(np.isin(b, (-1.0, 1.0))):
            raise ConfigError("labels must be +1 or -1")
        super().__init__(n=A.shape[1], m=4)
        self.A = A
        self.b = b

    def eval_map(self, token, x):
        return self.eval_map_batch(np.array([token]), x)[0]

    def eval_jac(self, token, x):
        return self.eval_jac_batch(np.array([token]), x)[0]

    def eval_map_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        # row-wise sum, not matmul: each component's value must be bitwise
        # identical no matter which batch it appears in, or the corrected
        # estimator's cancellation at the anchor picks up BLAS rounding noise
        z = (self.A[tokens] * x).sum(axis=1) * self.b[tokens]
        return loss_values(z)

    def eval_jac_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        rows = self.b[tokens, None] * self.A[tokens]
        z = (self.A[tokens] * x).sum(axis=1) * self.b[tokens]
        return loss_slopes(z)[:, :, None] * rows[:, None, :]


@dataclass(frozen=True)
class MultiLossInstance:
    """Labeled data (a_j, b_j) plus the l1 sparsity weight beta."""

    features: np.ndarray
    labels: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "features", as_matrix(self.features, name="features"))
        labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "labels", labels)
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")


def _multiloss_constants(A):
    row_norms = np.linalg.norm(A, axis=1)
    amax = float(np.max(row_norms)) if len(row_norms) else 0.0
    return amax


def multiloss_oracle(instance: MultiLossInstance) -> CompositeProblem:
    """Nonsmooth variant: l1 norm of the averaged losses plus beta*||x||_1."""
    oracle = MultiLossOracle(instance.features, instance.labels)
    amax = _multiloss_constants(oracle.A)
    constants = SmoothnessConstants(
        ell_f=2.0,                          # sqrt(m), m = 4
        ell_g=LOSS_SLOPE_NORM * amax,
        L_g=LOSS_CURV_NORM * amax**2,
    )
    return CompositeProblem(oracle=oracle, regime=FiniteSum(oracle.A.shape[0]),
                            outer=L1Norm(),
                            reg=L1Regularizer(instance.beta),
                            constants=constants)


def multiloss_smooth_oracle(instance: MultiLossInstance) -> CompositeProblem:
    """Smooth variant: squared norm of the averaged losses, no regularizer.

    The squared-norm outer is not globally Lipschitz, so ell_f is left
    undocumented; runs on this problem take M explicitly.
    """
    oracle = MultiLossOracle(instance.features, instance.labels)
    amax = _multiloss_constants(oracle.A)
    constants = SmoothnessConstants(
        L_f=2.0,
        ell_g=LOSS_SLOPE_NORM * amax,
        L_g=LOSS_CURV_NORM * amax**2,
    )
    return CompositeProblem(oracle=oracle, regime=FiniteSum(oracle.A.shape[0]),
                            outer=SquaredNorm(1.0), reg=ZeroRegularizer(),
                            constants=constants)


# ---------------------------------------------------------------------------
# Smoothed-CVaR portfolio
# ---------------------------------------------------------------------------

class PortfolioOracle(ComponentOracle):
    """Decision (x, t) in R^(d+1): component i maps to
    (
      -<r_i, x>,
      t + s(<r_i, x> + t)
    )
    with the smoothed hinge s(w) = (sqrt(w^2 + gamma^2) - w - gamma)/(2 beta).
    """

    def __init__(self, returns, beta, gamma):
        R = as_matrix(returns, name="returns")
        super().__init__(n=R.shape[1] + 1, m=2)
        self.R = R
        self.beta = float(beta)
        self.gamma = float(gamma)

    def _smooth(self, w):
        root = np.hypot(w, self.gamma)
        s = (root - w - self.gamma) / (2.0 * self.beta)
        sp = (w / root - 1.0) / (2.0 * self.beta)
        return s, sp

    def eval_map(self, token, x):
        return self.eval_map_batch(np.array([token]), x)[0]

    def eval_jac(self, token, x):
        return self.eval_jac_batch(np.array([token]), x)[0]

    def eval_map_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        xd, t = x[:-1], x[-1]
        rx = (self.R[tokens] * xd).sum(axis=1)
        s, _ = self._smooth(rx + t)
        return np.stack([-rx, t + s], axis=-1)

    def eval_jac_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        xd, t = x[:-1], x[-1]
        rows = self.R[tokens]
        rx = (rows * xd).sum(axis=1)
        _, sp = self._smooth(rx + t)
        out = np.zeros((len(tokens), 2, self.n))
        out[:, 0, :-1] = -rows
        out[:, 1, :-1] = sp[:, None] * rows
        out[:, 1, -1] = 1.0 + sp
        return out


@dataclass(frozen=True)
class PortfolioInstance:
    """Return rows r_i, tail level beta in (0,1), penalty weight rho > 0,
    hinge smoothing gamma > 0."""

    returns: np.ndarray
    beta: float
    rho: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "returns", as_matrix(self.returns, name="returns"))
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must lie in (0, 1)")
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")


def portfolio_oracle(instance: PortfolioInstance) -> CompositeProblem:
    """Exact-penalty formulation: f(z) = z_1 + rho*max(0, z_2) over the
    averaged component rows, weights constrained to the simplex (the
    auxiliary last coordinate is free).

    Documented constants: the smoothed hinge has |s'| < 1/beta and
    |s''| <= 1/(2*beta*gamma), so component i is Lipschitz with
    ell_g_i^2 <= ||r_i||^2 (1 + 1/beta^2) + max(1, 1/beta - 1)^2 and its
    Jacobian is Lipschitz with L_g_i = (1 + ||r_i||^2)/(2*beta*gamma).
    """
    oracle = PortfolioOracle(instance.returns, instance.beta, instance.gamma)
    R = oracle.R
    row_sq = np.sum(R * R, axis=1)
    beta = instance.beta
    ell_rows = np.sqrt(row_sq * (1.0 + beta**-2) + max(1.0, 1.0 / beta - 1.0) ** 2)
    constants = SmoothnessConstants(
        ell_f=float(np.sqrt(1.0 + instance.rho**2)),
        ell_g=float(np.max(ell_rows)),
        L_g=float(np.max(1.0 + row_sq)) / (2.0 * beta * instance.gamma),
    )
    return CompositeProblem(oracle=oracle, regime=FiniteSum(R.shape[0]),
                            outer=AffinePlusHinge(instance.rho),
                            reg=SimplexIndicator(R.shape[1]),
                            constants=constants)


# ---------------------------------------------------------------------------
# Synthetic data generators and toy problems
# ---------------------------------------------------------------------------

def make_multiloss_data(N, n, seed):
    """Gaussian features (rows scaled ~1/sqrt(n)) with labels from a planted
    noisy linear rule."""
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 1.0 / np.sqrt(n), size=(N, n))
    w = rng.normal(0.0, 1.0, size=n)
    margin = A @ w + 0.1 * rng.normal(size=N)
    b = np.where(margin >= 0.0, 1.0, -1.0)
    return A, b


def make_portfolio_returns(N, d, seed):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.0, 0.05, size=d)
    return mu + 0.1 * rng.normal(size=(N, d))


class QuadraticFamilyOracle(ComponentOracle):
    """g_i(x) = (c_i/2)||x||^2 + <d_i, x>, m = 1 — curvatures are exact, so
    the component smoothness constant is max|c_i| with no slack."""

    def __init__(self, curvatures, offsets):
        offsets = as_matrix(offsets, name="offsets")
        curvatures = np.asarray(curvatures, dtype=np.float64).reshape(-1)
        if curvatures.size != offsets.shape[0]:
            raise ConfigError("curvatures and offsets disagree in length")
        super().__init__(n=offsets.shape[1], m=1)
        self.c = curvatures
        self.D = offsets

    def eval_map(self, token, x):
        return self.eval_map_batch(np.array([token]), x)[0]

    def eval_jac(self, token, x):
        return self.eval_jac_batch(np.array([token]), x)[0]

    def eval_map_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        vals = 0.5 * self.c[tokens] * float(x @ x) + (self.D[tokens] * x).sum(axis=1)
        return vals[:, None]

    def eval_jac_batch(self, tokens, x):
        tokens = np.asarray(tokens, dtype=np.int64)
        return (self.c[tokens, None] * x[None, :] + self.D[tokens])[:, None, :]


def quadratic_family_problem(N, n, seed, outer=None, reg=None) -> CompositeProblem:
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.2, 1.5, size=N)
    D = rng.normal(0.0, 1.0, size=(N, n))
    constants = SmoothnessConstants(ell_f=1.0, L_g=float(np.max(np.abs(c))))
    return CompositeProblem(oracle=QuadraticFamilyOracle(c, D),
                            regime=FiniteSum(N),
                            outer=outer if outer is not None else EuclideanNorm(),
                            reg=reg if reg is not None else ZeroRegularizer(),
                            constants=constants)


def synthetic_oracles() -> dict[str, CompositeProblem]:
    """Small fixed toys with documented constants and hand-checkable optima."""
    out = {}

    A = np.array([[2.0, 0.0, 1.0],
                  [0.0, 1.0, -1.0],
                  [1.0, 1.0, 0.0],
                  [0.0, 2.0, 1.0],
                  [1.0, 0.0, 3.0]])
    bvec = np.array([1.0, -1.0, 0.5, 2.0, 0.0])
    ls_oracle = CallableOracle(3, 5, lambda t, x: A @ x - bvec, lambda t, x: A)
    out["least_squares"] = CompositeProblem(
        oracle=ls_oracle, regime=FiniteSum(1), outer=SquaredNorm(1.0),
        reg=ZeroRegularizer(),
        constants=SmoothnessConstants(L_f=2.0, ell_g=float(np.linalg.norm(A, 2)),
                                      L_g=0.0))

    out["scalar_quadratic"] = CompositeProblem(
        oracle=CallableOracle(1, 1, lambda t, x: x.copy(), lambda t, x: np.eye(1)),
        regime=FiniteSum(1), outer=SquaredNorm(1.0), reg=ZeroRegularizer(),
        constants=SmoothnessConstants(L_f=2.0, ell_g=1.0, L_g=0.0))

    shifts = np.array([[1.0, -2.0], [0.5, 0.5], [-1.0, 1.0],
                       [2.0, 0.0], [0.0, -1.0], [-0.5, 3.0]])
    out["offset_l1"] = CompositeProblem(
        oracle=CallableOracle(2, 2, lambda t, x: x + shifts[t],
                              lambda t, x: np.eye(2)),
        regime=FiniteSum(6), outer=L1Norm(), reg=ZeroRegularizer(),
        constants=SmoothnessConstants(ell_f=np.sqrt(2.0), ell_g=1.0, L_g=0.0))

    centers = np.array([-1.0, 0.0, 0.5, 2.0, 3.0])
    out["truncated_quadratic"] = CompositeProblem(
        oracle=CallableOracle(
            1, 1,
            lambda t, x: np.array([0.5 * (x[0] - centers[t]) ** 2]),
            lambda t, x: np.array([[x[0] - centers[t]]])),
        regime=FiniteSum(5), outer=TruncatedIdentity(0.3), reg=ZeroRegularizer(),
        constants=SmoothnessConstants(ell_f=1.0, L_g=1.0))

    rng = np.random.default_rng(11)
    mats = rng.normal(0.0, 0.6, size=(4, 3, 3))
    offs = rng.normal(0.0, 0.5, size=(4, 3))
    out["simplex_max"] = CompositeProblem(
        oracle=CallableOracle(3, 3, lambda t, x: mats[t] @ x + offs[t],
                              lambda t, x: mats[t].copy()),
        regime=FiniteSum(4), outer=MaxCoordinate(), reg=SimplexIndicator(3),
        constants=SmoothnessConstants(
            ell_f=1.0, L_g=0.0,
            ell_g=float(max(np.linalg.norm(mt, 2) for mt in mats))))

    P = np.array([[1.0, 0.5], [0.2, -1.0], [0.8, 0.3]])
    Q = np.array([[-0.4, 1.0], [1.2, 0.1], [0.0, -0.7]])
    r = np.array([0.2, -0.5, 1.0])
    stacks = np.stack([np.stack([P[t], Q[t]]) for t in range(3)])
    out["hinge_penalty"] = CompositeProblem(
        oracle=CallableOracle(
            2, 2,
            lambda t, x: np.array([P[t] @ x, Q[t] @ x + r[t]]),
            lambda t, x: stacks[t].copy()),
        regime=FiniteSum(3), outer=AffinePlusHinge(2.0), reg=ZeroRegularizer(),
        constants=SmoothnessConstants(
            ell_f=float(np.sqrt(5.0)), L_g=0.0,
            ell_g=float(max(np.linalg.norm(st, 2) for st in stacks))))

    return out


def builtin_problems(seed: int = 0) -> dict[str, CompositeProblem]:
    """All built-in problems: deterministic toys plus seeded synthetic
    instances of the three data-driven problems."""
    out = synthetic_oracles()
    A, b = make_multiloss_data(60, 8, seed)
    inst = MultiLossInstance(features=A, labels=b, beta=0.01)
    out["multiloss"] = multiloss_oracle(inst)
    out["multiloss_smooth"] = multiloss_smooth_oracle(inst)
    R = make_portfolio_returns(40, 5, seed + 1)
    out["portfolio"] = portfolio_oracle(
        PortfolioInstance(returns=R, beta=0.2, rho=3.0, gamma=0.1))
    return out


# ---------------------------------------------------------------------------
# Verification checks (used by the CLI check command and the test suite)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_jacobian(problem: CompositeProblem, seed: int = 0, points: int = 20,
                   rel_tol: float = 1e-5) -> CheckResult:
    """Central finite differences of eval_map vs eval_jac at random points."""
    rng = np.random.default_rng(seed)
    full = problem.regime.full_tokens()
    n_tok = len(full) if full is not None else 1
    worst = 0.0
    for _ in range(points):
        x = rng.normal(0.0, 1.0, size=problem.n)
        token = int(rng.integers(0, n_tok))
        J = problem.oracle.eval_jac(token, x)
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
        fd = np.empty_like(J)
        for k in range(problem.n):
            e = np.zeros(problem.n)
            e[k] = h
            fd[:, k] = (problem.oracle.eval_map(token, x + e)
                        - problem.oracle.eval_map(token, x - e)) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(fd - J) / (1.0 + np.abs(J)))))
    return CheckResult("jacobian_fd", worst <= rel_tol,
                       f"max relative deviation {worst:.3e} (tol {rel_tol:.1e})")


def _difference_quotients(problem, which, trials, rng, scale=2.0):
    """Empirical Lipschitz quotients for the component maps (which='map') or
    Jacobians (which='jac'), mixing far-apart and nearby pairs."""
    full = problem.regime.full_tokens()
    n_tok = len(full) if full is not None else 1
    worst = 0.0
    for trial in range(trials):
        token = int(rng.integers(0, n_tok))
        x = rng.normal(0.0, scale, size=problem.n)
        if trial % 2 == 0:
            y = rng.normal(0.0, scale, size=problem.n)
        else:
            y = x + 1e-3 * rng.normal(0.0, 1.0, size=problem.n)
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            continue
        if which == "map":
            diff = float(np.linalg.norm(problem.oracle.eval_map(token, x)
                                        - problem.oracle.eval_map(token, y)))
        else:
            diff = float(np.linalg.norm(problem.oracle.eval_jac(token, x)
                                        - problem.oracle.eval_jac(token, y), 2))
        worst = max(worst, diff / dist)
    return worst


def check_lipschitz(problem: CompositeProblem, trials: int = 10_000,
                    seed: int = 0) -> list[CheckResult]:
    """Documented constants must dominate empirical difference quotients."""
    rng = np.random.default_rng(seed)
    results = []
    c = problem.constants
    slack = 1.0 + 1e-9
    if c.ell_g is not None:
        worst = _difference_quotients(problem, "map", trials, rng)
        results.append(CheckResult(
            "ell_g_dominates", worst <= c.ell_g * slack,
            f"empirical {worst:.6g} vs documented {c.ell_g:.6g}"))
    if c.L_g is not None and c.L_g > 0.0:
        worst = _difference_quotients(problem, "jac", trials, rng)
        results.append(CheckResult(
            "L_g_dominates", worst <= c.L_g * slack,
            f"empirical {worst:.6g} vs documented {c.L_g:.6g}"))
    if c.ell_f is not None:
        worst = 0.0
        for _ in range(trials):
            u = rng.normal(0.0, 3.0, size=problem.m)
            v = rng.normal(0.0, 3.0, size=problem.m)
            dist = float(np.linalg.norm(u - v))
            if dist == 0.0:
                continue
            worst = max(worst, abs(problem.outer.value(u)
                                   - problem.outer.value(v)) / dist)
        results.append(CheckResult(
            "ell_f_dominates", worst <= c.ell_f * slack,
            f"empirical {worst:.6g} vs documented {c.ell_f:.6g}"))
    return results


def check_permutation_invariance(instance: PortfolioInstance, seed: int = 0,
                                 points: int = 10) -> CheckResult:
    """The averaged portfolio objective must not depend on row order."""
    rng = np.random.default_rng(seed)
    base = portfolio_oracle(instance)
    perm = rng.permutation(instance.returns.shape[0])
    shuffled = portfolio_oracle(PortfolioInstance(
        returns=instance.returns[perm], beta=instance.beta,
        rho=instance.rho, gamma=instance.gamma))
    worst = 0.0
    d = instance.returns.shape[1]
    for _ in range(points):
        x = np.concatenate([rng.dirichlet(np.ones(d)), rng.normal(size=1)])
        worst = max(worst, abs(objective_value(base, x) - objective_value(shuffled, x)))
    return CheckResult("permutation_invariance", worst <= 1e-9,
                       f"max objective deviation {worst:.3e}")


def run_problem_checks(problem: CompositeProblem, seed: int = 0,
                       fd_points: int = 20, lip_trials: int = 2000) -> list[CheckResult]:
    """The default verification bundle for one problem."""
    results = [check_jacobian(problem, seed=seed, points=fd_points)]
    results.extend(check_lipschitz(problem, trials=lip_trials, seed=seed))
    return results
