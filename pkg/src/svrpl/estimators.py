"""Variance-reduced estimators for the composite mapping and its Jacobian.

Each scheme produces per-iteration estimates (g̃, J̃) together with an exact
count of component-oracle calls. Sampling is with replacement; one generator
per run is consumed in a fixed order — g-batch first, then j-batch — so seeds
are portable across schemes. A batch of size N on a FiniteSum problem means
the exact full set in ascending order (no generator draw), which makes the
full-batch configurations of every scheme reproduce the deterministic method
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import CompositeProblem, Expectation, FiniteSum, as_vector

SCHEMES = ("full_batch", "mini_batch", "svrg_corrected", "sarah")


@dataclass(frozen=True)
class BatchSpec:
    """Batch sizes for one update; shared=True takes the Jacobian batch as the
    leading size_j tokens of the mapping batch."""

    size_g: int
    size_j: int
    shared: bool = False

    def __post_init__(self):
        if self.size_g < 1 or self.size_j < 1:
            raise ConfigError("BatchSpec: batch sizes must be >= 1")
        if self.shared and self.size_j > self.size_g:
            raise ConfigError("BatchSpec: shared batches require size_j <= size_g")


@dataclass(frozen=True)
class EstimateOut:
    g_tilde: np.ndarray
    J_tilde: np.ndarray
    calls_g: int
    calls_j: int


class EstimatorState:
    """Mutable per-run estimator state for one of the four schemes.

    svrg_corrected keeps the anchor point, the exact anchor averages, and the
    per-component values/Jacobians at the anchor (all N of them, evaluated
    once during anchor_reset) so inner corrections reuse them without new
    oracle calls — this is what makes the call accounting match the scheme's
    advertised cost. sarah keeps the running estimates and the previous
    iterate; each inner update evaluates its batch at both points.
    """

    def __init__(self, scheme: str, rng: np.random.Generator):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown estimator scheme {scheme!r}; choose from {SCHEMES}")
        self.scheme = scheme
        self.rng = rng
        self.anchor_x = None
        self.anchor_g = None
        self.anchor_J = None
        self.comp_maps = None
        self.comp_jacs = None
        self.running_g = None
        self.running_J = None
        self.prev_x = None

    @property
    def ready(self):
        if self.scheme == "svrg_corrected":
            return self.anchor_x is not None
        if self.scheme == "sarah":
            return self.prev_x is not None
        return True


def _check_finite_sizes(regime, spec: BatchSpec):
    if isinstance(regime, FiniteSum):
        if spec.size_g > regime.N or spec.size_j > regime.N:
            raise ConfigError(
                f"batch sizes ({spec.size_g}, {spec.size_j}) exceed N={regime.N}; "
                "cap them explicitly in the schedule"
            )


def _draw_tokens(state, regime, spec: BatchSpec):
    """Draw (tokens_g, tokens_j) honoring the fixed g-then-j stream order.

    In the FiniteSum regime a batch of exactly N is the deterministic full
    ascending set and consumes nothing from the generator.
    """
    full_n = regime.N if isinstance(regime, FiniteSum) else None
    if full_n is not None and spec.size_g == full_n:
        tokens_g = np.arange(full_n)
    else:
        tokens_g = state.rng.integers(0, full_n, size=spec.size_g) if full_n is not None \
            else regime.draw(state.rng, spec.size_g)
    if spec.shared:
        tokens_j = tokens_g[: spec.size_j]
    elif full_n is not None and spec.size_j == full_n:
        tokens_j = np.arange(full_n)
    else:
        tokens_j = state.rng.integers(0, full_n, size=spec.size_j) if full_n is not None \
            else regime.draw(state.rng, spec.size_j)
    return tokens_g, tokens_j


def _exact_full(problem, x):
    toks = problem.regime.full_tokens()
    maps = problem.oracle.eval_map_batch(toks, x)
    jacs = problem.oracle.eval_jac_batch(toks, x)
    return toks, maps, jacs


def anchor_reset(state: EstimatorState, problem: CompositeProblem, x0,
                 batch0: BatchSpec) -> EstimateOut:
    """Start an epoch at x0 with the scheme's anchor estimates.

    FiniteSum full_batch/svrg_corrected/sarah require batch0 sizes equal to N
    and produce the exact averages; Expectation sarah/mini_batch average over
    batch0 fresh samples.
    """
    x0 = as_vector(x0, problem.n, "x0")
    regime = problem.regime
    _check_finite_sizes(regime, batch0)

    if state.scheme == "svrg_corrected":
        if not isinstance(regime, FiniteSum):
            raise ConfigError("svrg_corrected requires a FiniteSum regime")
        if batch0.size_g != regime.N or batch0.size_j != regime.N:
            raise ConfigError("svrg_corrected anchors must use the full batch (N)")
        _, maps, jacs = _exact_full(problem, x0)
        state.anchor_x = x0.copy()
        state.comp_maps = maps
        state.comp_jacs = jacs
        state.anchor_g = maps.sum(axis=0) / regime.N
        state.anchor_J = jacs.sum(axis=0) / regime.N
        return EstimateOut(state.anchor_g.copy(), state.anchor_J.copy(),
                           regime.N, regime.N)

    if state.scheme == "sarah":
        if isinstance(regime, FiniteSum):
            if batch0.size_g != regime.N or batch0.size_j != regime.N:
                raise ConfigError("sarah anchors on a FiniteSum must use the full batch (N)")
            _, maps, jacs = _exact_full(problem, x0)
            state.running_g = maps.sum(axis=0) / regime.N
            state.running_J = jacs.sum(axis=0) / regime.N
            state.prev_x = x0.copy()
            return EstimateOut(state.running_g.copy(), state.running_J.copy(),
                               regime.N, regime.N)
        tokens_g, tokens_j = _draw_tokens(state, regime, batch0)
        maps = problem.oracle.eval_map_batch(tokens_g, x0)
        jacs = problem.oracle.eval_jac_batch(tokens_j, x0)
        state.running_g = maps.mean(axis=0)
        state.running_J = jacs.mean(axis=0)
        state.prev_x = x0.copy()
        return EstimateOut(state.running_g.copy(), state.running_J.copy(),
                           batch0.size_g, batch0.size_j)

    if state.scheme == "full_batch":
        if isinstance(regime, FiniteSum) and (batch0.size_g != regime.N
                                              or batch0.size_j != regime.N):
            raise ConfigError("full_batch anchors on a FiniteSum must use the full batch (N)")
        toks, maps, jacs = _exact_full(problem, x0)
        n_tok = len(toks)
        return EstimateOut(maps.sum(axis=0) / n_tok, jacs.sum(axis=0) / n_tok,
                           n_tok, n_tok)

    # mini_batch: a fresh estimate, same as its inner update
    return inner_update(state, problem, x0, batch0)


def inner_update(state: EstimatorState, problem: CompositeProblem, x_i,
                 batch: BatchSpec) -> EstimateOut:
    """One inner-iteration estimate at x_i under the scheme's recursion."""
    x_i = as_vector(x_i, problem.n, "x_i")
    regime = problem.regime
    _check_finite_sizes(regime, batch)
    oracle = problem.oracle

    if state.scheme == "full_batch":
        toks, maps, jacs = _exact_full(problem, x_i)
        n_tok = len(toks)
        return EstimateOut(maps.sum(axis=0) / n_tok, jacs.sum(axis=0) / n_tok,
                           n_tok, n_tok)

    if state.scheme == "mini_batch":
        tokens_g, tokens_j = _draw_tokens(state, regime, batch)
        g_tilde = oracle.eval_map_batch(tokens_g, x_i).mean(axis=0)
        J_tilde = oracle.eval_jac_batch(tokens_j, x_i).mean(axis=0)
        return EstimateOut(g_tilde, J_tilde, batch.size_g, batch.size_j)

    if not state.ready:
        raise ConfigError(f"{state.scheme}: inner_update before anchor_reset")

    if state.scheme == "svrg_corrected":
        tokens_g, tokens_j = _draw_tokens(state, regime, batch)
        d = x_i - state.anchor_x
        maps_x = oracle.eval_map_batch(tokens_g, x_i)
        corr = maps_x - state.comp_maps[tokens_g] - state.comp_jacs[tokens_g] @ d
        g_tilde = corr.sum(axis=0) / batch.size_g + state.anchor_g + state.anchor_J @ d
        jacs_x = oracle.eval_jac_batch(tokens_j, x_i)
        jac_corr = jacs_x - state.comp_jacs[tokens_j]
        J_tilde = jac_corr.sum(axis=0) / batch.size_j + state.anchor_J
        return EstimateOut(g_tilde, J_tilde, batch.size_g, batch.size_j)

    # sarah: running difference recursion, each batch evaluated at x_i and prev_x
    tokens_g, tokens_j = _draw_tokens(state, regime, batch)
    maps_new = oracle.eval_map_batch(tokens_g, x_i)
    maps_old = oracle.eval_map_batch(tokens_g, state.prev_x)
    state.running_g = state.running_g + (maps_new - maps_old).sum(axis=0) / batch.size_g
    jacs_new = oracle.eval_jac_batch(tokens_j, x_i)
    jacs_old = oracle.eval_jac_batch(tokens_j, state.prev_x)
    state.running_J = state.running_J + (jacs_new - jacs_old).sum(axis=0) / batch.size_j
    state.prev_x = x_i.copy()
    return EstimateOut(state.running_g.copy(), state.running_J.copy(),
                       2 * batch.size_g, 2 * batch.size_j)
