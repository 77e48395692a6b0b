"""Core domain types for composite problems minimize f(g(x)) + h(x).

g is a finite average (1/N) sum_i g_i or an expectation E[g_xi] of smooth
component mappings R^n -> R^m, f is a convex outer function, and h is a
convex regularizer. This module houses the problem/oracle/outer/regularizer
types and the exact full-data evaluation helpers; everything else in the
package builds on these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .proxops import project_linf_ball, project_simplex, prox_l1


def as_vector(x, n=None, name="vector"):
    """Validate and return a finite 1-D float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise ConfigError(f"{name}: expected a 1-D array, got shape {x.shape}")
    if n is not None and x.size != n:
        raise ConfigError(f"{name}: expected length {n}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{name}: non-finite entries")
    return x


def as_matrix(A, shape=None, name="matrix"):
    """Validate and return a finite 2-D float64 array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ConfigError(f"{name}: expected a 2-D array, got shape {A.shape}")
    if shape is not None and A.shape != tuple(shape):
        raise ConfigError(f"{name}: expected shape {tuple(shape)}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name}: non-finite entries")
    return A


# ---------------------------------------------------------------------------
# Component oracles
# ---------------------------------------------------------------------------

class ComponentOracle:
    """A family of smooth component mappings indexed by integer tokens.

    Tokens are 0-based. ``eval_map(token, x)`` returns g_token(x) in R^m and
    ``eval_jac(token, x)`` its m-by-n Jacobian. Both must be deterministic
    functions of (token, x) — so must the batch variants, which exist so
    built-in problems can vectorize over tokens (the defaults just loop).
    """

    def __init__(self, n, m):
        self.n = int(n)
        self.m = int(m)

    def eval_map(self, token, x):
        raise NotImplementedError

    def eval_jac(self, token, x):
        raise NotImplementedError

    def eval_map_batch(self, tokens, x):
        """Stacked maps, shape (len(tokens), m)."""
        return np.stack([self.eval_map(int(t), x) for t in tokens])

    def eval_jac_batch(self, tokens, x):
        """Stacked Jacobians, shape (len(tokens), m, n)."""
        return np.stack([self.eval_jac(int(t), x) for t in tokens])


class CallableOracle(ComponentOracle):
    """Wrap plain callables (token, x) -> map / Jacobian as an oracle."""

    def __init__(self, n, m, map_fn, jac_fn):
        super().__init__(n, m)
        self._map_fn = map_fn
        self._jac_fn = jac_fn

    def eval_map(self, token, x):
        out = np.asarray(self._map_fn(token, x), dtype=np.float64).reshape(self.m)
        return out

    def eval_jac(self, token, x):
        return np.asarray(self._jac_fn(token, x), dtype=np.float64).reshape(self.m, self.n)


# ---------------------------------------------------------------------------
# Sampling regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteSum:
    """g is the average of exactly N components, tokens 0..N-1."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("FiniteSum: N must be a positive integer")

    def full_tokens(self):
        return np.arange(self.N)

    def draw(self, rng, size):
        """Uniform with-replacement sample of component tokens."""
        return rng.integers(0, self.N, size=size)


@dataclass(frozen=True)
class Expectation:
    """g is an expectation over a token distribution.

    ``population`` declares a uniform distribution over 0..population-1
    (the usual finite dataset standing in for a distribution); alternatively
    a ``sampler(rng, size) -> int array`` callable may be supplied. Exact
    full-data quantities are only defined when a population (or an explicit
    token list) is available.
    """

    population: int | None = None
    sampler: object = None

    def __post_init__(self):
        if (self.population is None) == (self.sampler is None):
            raise ConfigError("Expectation: supply exactly one of population or sampler")
        if self.population is not None and self.population < 1:
            raise ConfigError("Expectation: population must be a positive integer")

    def full_tokens(self):
        if self.population is None:
            return None
        return np.arange(self.population)

    def draw(self, rng, size):
        if self.sampler is not None:
            return np.asarray(self.sampler(rng, size), dtype=np.int64)
        return rng.integers(0, self.population, size=size)


# ---------------------------------------------------------------------------
# Outer functions
# ---------------------------------------------------------------------------

class OuterFunction:
    """Convex outer function f with the conjugate structure the dual solver uses.

    Each variant provides f itself plus its Fenchel conjugate f* restricted to
    dom f*: ``conj_value``/``conj_grad`` (both identically zero for the
    support-function variants), ``conj_project`` (Euclidean projection onto
    dom f*), ``conj_support(z)`` (a maximizer of <y,z> - f*(y), used to start
    the dual ascent at a point where the Fenchel-Young gap at z is zero), and
    ``conj_curvature`` (Lipschitz constant of grad f*, zero when f* is affine).
    ``lipschitz(m)`` is the documented global Lipschitz constant of f on R^m,
    or None for the squared-norm variant (smooth path only).
    """

    #: Lipschitz constant of grad f* on dom f*; 0 unless f* is curved.
    conj_curvature = 0.0

    def value(self, z):
        raise NotImplementedError

    def lipschitz(self, m):
        raise NotImplementedError

    def conj_value(self, y):
        return 0.0

    def conj_grad(self, y):
        return np.zeros_like(np.asarray(y, dtype=np.float64))

    def conj_project(self, y):
        raise NotImplementedError

    def conj_support(self, z):
        raise NotImplementedError

    def expected_m(self):
        """Required map dimension, or None if any m is accepted."""
        return None


class L1Norm(OuterFunction):
    """f(z) = ||z||_1; conjugate domain is the unit l-infinity ball."""

    def value(self, z):
        return float(np.sum(np.abs(z)))

    def lipschitz(self, m):
        return float(np.sqrt(m))

    def conj_project(self, y):
        return project_linf_ball(y, 1.0)

    def conj_support(self, z):
        return np.sign(np.asarray(z, dtype=np.float64))


class MaxCoordinate(OuterFunction):
    """f(z) = max_j z_j; conjugate domain is the unit simplex."""

    def value(self, z):
        return float(np.max(z))

    def lipschitz(self, m):
        return 1.0

    def conj_project(self, y):
        return project_simplex(y)

    def conj_support(self, z):
        z = np.asarray(z, dtype=np.float64)
        y = np.zeros_like(z)
        y[int(np.argmax(z))] = 1.0
        return y


class EuclideanNorm(OuterFunction):
    """f(z) = ||z||_2; conjugate domain is the unit l2 ball."""

    def value(self, z):
        return float(np.linalg.norm(z))

    def lipschitz(self, m):
        return 1.0

    def conj_project(self, y):
        y = np.asarray(y, dtype=np.float64)
        norm = np.linalg.norm(y)
        if norm <= 1.0:
            return y.copy()
        return y / norm

    def conj_support(self, z):
        z = np.asarray(z, dtype=np.float64)
        norm = np.linalg.norm(z)
        if norm == 0.0:
            return np.zeros_like(z)
        return z / norm


class TruncatedIdentity(OuterFunction):
    """f(z) = max{z, floor} for scalar z (m = 1).

    On dom f* = [0, 1] the conjugate is affine: f*(y) = (y - 1) * floor.
    """

    def __init__(self, floor):
        self.floor = float(floor)

    def value(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(1)
        return float(max(z[0], self.floor))

    def lipschitz(self, m):
        return 1.0

    def conj_value(self, y):
        y = np.asarray(y, dtype=np.float64).reshape(1)
        return float((y[0] - 1.0) * self.floor)

    def conj_grad(self, y):
        return np.array([self.floor])

    def conj_project(self, y):
        return np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)

    def conj_support(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(1)
        return np.array([1.0 if z[0] >= self.floor else 0.0])

    def expected_m(self):
        return 1


class AffinePlusHinge(OuterFunction):
    """f(z) = z_1 + rho * max{0, z_2} on R^2; dom f* = {1} x [0, rho].

    rho = 0 degenerates to f(z) = z_1, the identity outer function (useful
    because the gradient mapping then coincides with the gradient).
    """

    def __init__(self, rho):
        if rho < 0:
            raise ConfigError("AffinePlusHinge: rho must be nonnegative")
        self.rho = float(rho)

    def value(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(2)
        return float(z[0] + self.rho * max(0.0, z[1]))

    def lipschitz(self, m):
        return float(np.sqrt(1.0 + self.rho**2))

    def conj_project(self, y):
        y = np.asarray(y, dtype=np.float64).reshape(2)
        return np.array([1.0, min(max(y[1], 0.0), self.rho)])

    def conj_support(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(2)
        return np.array([1.0, self.rho if z[1] > 0 else 0.0])

    def expected_m(self):
        return 2


class SquaredNorm(OuterFunction):
    """f(z) = coeff * ||z||^2 — the smooth outer function.

    Not globally Lipschitz (``lipschitz`` is None); problems using it follow
    the smooth path with gradient constant L_f = 2*coeff, and any documented
    ell_f is a local convention over the relevant sublevel region. The
    conjugate f*(y) = ||y||^2 / (4*coeff) lives on all of R^m, so the dual
    solver treats it as an unconstrained, strongly concave problem.
    """

    def __init__(self, coeff=1.0):
        if coeff <= 0:
            raise ConfigError("SquaredNorm: coeff must be positive")
        self.coeff = float(coeff)

    def value(self, z):
        z = np.asarray(z, dtype=np.float64)
        return float(self.coeff * np.dot(z, z))

    def lipschitz(self, m):
        return None

    @property
    def conj_curvature(self):
        return 1.0 / (2.0 * self.coeff)

    def conj_value(self, y):
        y = np.asarray(y, dtype=np.float64)
        return float(np.dot(y, y) / (4.0 * self.coeff))

    def conj_grad(self, y):
        return np.asarray(y, dtype=np.float64) / (2.0 * self.coeff)

    def conj_project(self, y):
        return np.asarray(y, dtype=np.float64).copy()

    def conj_support(self, z):
        return 2.0 * self.coeff * np.asarray(z, dtype=np.float64)


# ---------------------------------------------------------------------------
# Regularizers
# ---------------------------------------------------------------------------

class Regularizer:
    """Convex lower-semicontinuous h with a proximal operator.

    ``prox(v, t)`` returns argmin_u { value(u) + ||u - v||^2 / (2t) }.
    """

    def value(self, x):
        raise NotImplementedError

    def prox(self, v, t):
        raise NotImplementedError

    def expected_min_n(self):
        return 1


class ZeroRegularizer(Regularizer):
    """h = 0."""

    def value(self, x):
        return 0.0

    def prox(self, v, t):
        return np.asarray(v, dtype=np.float64).copy()


class L1Regularizer(Regularizer):
    """h(x) = lam * ||x||_1."""

    def __init__(self, lam):
        if lam < 0:
            raise ConfigError("L1Regularizer: weight must be nonnegative")
        self.lam = float(lam)

    def value(self, x):
        return float(self.lam * np.sum(np.abs(x)))

    def prox(self, v, t):
        return prox_l1(v, t, self.lam)


class SimplexIndicator(Regularizer):
    """Indicator of {x : x[:dim] in the unit simplex}; trailing coordinates free.

    Membership for ``value`` uses a small tolerance (1e-9 on the coordinate sum,
    -1e-12 on nonnegativity) so that projected points evaluate to 0.
    """

    def __init__(self, dim):
        if dim < 1:
            raise ConfigError("SimplexIndicator: dim must be >= 1")
        self.dim = int(dim)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        head = x[: self.dim]
        if abs(float(np.sum(head)) - 1.0) <= 1e-9 and float(np.min(head)) >= -1e-12:
            return 0.0
        return float("inf")

    def prox(self, v, t):
        v = np.asarray(v, dtype=np.float64)
        out = v.copy()
        out[: self.dim] = project_simplex(v[: self.dim])
        return out

    def expected_min_n(self):
        return self.dim


# ---------------------------------------------------------------------------
# Smoothness constants and the composite problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothnessConstants:
    """Documented constants: ell_* are Lipschitz constants of the functions
    themselves, L_* of their derivatives; sigma_g/sigma_gprime are the
    variance bounds used by the expectation-regime batch schedules. All are
    problem-supplied, never estimated at runtime.
    """

    ell_f: float | None = None
    L_f: float | None = None
    ell_g: float | None = None
    L_g: float | None = None
    sigma_g: float | None = None
    sigma_gprime: float | None = None

    def __post_init__(self):
        for name in ("ell_f", "L_f", "ell_g", "L_g", "sigma_g", "sigma_gprime"):
            val = getattr(self, name)
            if val is not None and (not np.isfinite(val) or val < 0):
                raise ConfigError(f"SmoothnessConstants: {name} must be finite and >= 0")

    @property
    def L_fog(self):
        """Gradient Lipschitz constant of f(g(x)) for smooth f:
        ell_f * L_g + L_f * ell_g^2 (None when the needed pieces are absent).
        """
        if self.L_f is None or self.ell_g is None:
            return None
        if self.L_g is None or self.L_g == 0.0:
            cross = 0.0
        elif self.ell_f is None:
            return None
        else:
            cross = self.ell_f * self.L_g
        return cross + self.L_f * self.ell_g**2


@dataclass(frozen=True)
class CompositeProblem:
    """A composite objective Phi(x) = f((1/N) sum_i g_i(x)) + h(x)."""

    oracle: ComponentOracle
    regime: object
    outer: OuterFunction
    reg: Regularizer
    constants: SmoothnessConstants = SmoothnessConstants()

    def __post_init__(self):
        m_expected = self.outer.expected_m()
        if m_expected is not None and self.oracle.m != m_expected:
            raise ConfigError(
                f"outer function expects m={m_expected}, oracle has m={self.oracle.m}"
            )
        if self.reg.expected_min_n() > self.oracle.n:
            raise ConfigError(
                f"regularizer needs n >= {self.reg.expected_min_n()}, oracle has n={self.oracle.n}"
            )

    @property
    def n(self):
        return self.oracle.n

    @property
    def m(self):
        return self.oracle.m

    def default_m_penalty(self):
        """Default proximal penalty: 4*ell_f*L_g when both are documented and
        positive, else 4*L_fog for smooth outers, else None (caller must
        supply M explicitly).
        """
        c = self.constants
        if c.ell_f is not None and c.L_g is not None and c.ell_f * c.L_g > 0:
            return 4.0 * c.ell_f * c.L_g
        if c.L_fog is not None and c.L_fog > 0:
            return 4.0 * c.L_fog
        return None


def _resolve_tokens(problem, tokens):
    if tokens is not None:
        return np.sort(np.asarray(tokens, dtype=np.int64))
    full = problem.regime.full_tokens()
    if full is None:
        raise ConfigError(
            "full-data evaluation on an Expectation regime without a population "
            "requires an explicit token list"
        )
    return full


def full_average_map(problem, x, tokens=None):
    """Exact average (1/N) sum_i g_i(x), summed in ascending token order.

    For Expectation regimes the average runs over the declared population
    (or an explicit token list).
    """
    x = as_vector(x, problem.n, "x")
    toks = _resolve_tokens(problem, tokens)
    vals = problem.oracle.eval_map_batch(toks, x)
    return vals.sum(axis=0) / len(toks)


def full_average_jacobian(problem, x, tokens=None):
    """Exact average Jacobian (1/N) sum_i g_i'(x), ascending token order."""
    x = as_vector(x, problem.n, "x")
    toks = _resolve_tokens(problem, tokens)
    jacs = problem.oracle.eval_jac_batch(toks, x)
    return jacs.sum(axis=0) / len(toks)


def objective_value(problem, x, tokens=None):
    """Phi(x) = f(average map at x) + h(x); +inf outside dom h."""
    x = as_vector(x, problem.n, "x")
    h = problem.reg.value(x)
    if not np.isfinite(h):
        return float("inf")
    return problem.outer.value(full_average_map(problem, x, tokens)) + h
