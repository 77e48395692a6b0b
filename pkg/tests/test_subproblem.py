"""Tests for the linearized-model solvers.

Every path is pinned to hand-worked closed forms and to grid-search oracles,
and the variational guarantees (strong-convexity decrease, gap validity,
agreement between independent solution paths) are exercised on random
instances.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from svrpl.errors import ConfigError, SubproblemError
from svrpl.model import (
    AffinePlusHinge,
    EuclideanNorm,
    L1Norm,
    L1Regularizer,
    MaxCoordinate,
    SimplexIndicator,
    SquaredNorm,
    TruncatedIdentity,
    ZeroRegularizer,
)
from svrpl.subproblem import (
    ProxLinearModel,
    SubproblemSolution,
    model_value,
    solve,
    solve_dual,
    solve_gauss_newton,
    solve_truncated,
)

import oracles


def _model(x_bar, g, J, M, outer, reg=None):
    return ProxLinearModel(x_bar=np.atleast_1d(np.asarray(x_bar, float)),
                           g_tilde=np.atleast_1d(np.asarray(g, float)),
                           J_tilde=np.atleast_2d(np.asarray(J, float)),
                           M=M, outer=outer,
                           reg=reg if reg is not None else ZeroRegularizer())


class TestModelValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            ProxLinearModel(x_bar=np.zeros(2), g_tilde=np.zeros(2),
                            J_tilde=np.zeros((2, 3)), M=1.0,
                            outer=L1Norm(), reg=ZeroRegularizer())

    def test_nonpositive_penalty(self):
        with pytest.raises(ConfigError):
            _model([0.0], [0.0], [[1.0]], 0.0, L1Norm())

    def test_model_value_infeasible_point(self):
        m = _model([0.5, 0.5], [0.0, 0.0], np.eye(2), 1.0, L1Norm(),
                   SimplexIndicator(2))
        assert model_value(m, np.array([2.0, 2.0])) == np.inf


class TestDispatch:
    def test_zero_estimate_returns_anchor(self):
        """With g_tilde = 0 and h = 0 the anchor is already optimal for any
        outer minimized at the origin."""
        rng = np.random.default_rng(42)
        for outer in (L1Norm(), EuclideanNorm(), SquaredNorm(1.0)):
            x_bar = rng.normal(size=3)
            J = rng.normal(size=(3, 3))
            sol = solve(_model(x_bar, np.zeros(3), J, 2.0, outer))
            assert_allclose(sol.x_plus, x_bar, atol=1e-7)

    def test_closed_forms_report_zero_iterations(self):
        gn = solve(_model([1.0], [1.0], [[1.0]], 1.0, SquaredNorm(1.0)))
        tr = solve(_model([1.0], [1.0], [[1.0]], 1.0, TruncatedIdentity(0.0)))
        du = solve(_model([1.0], [1.0], [[1.0]], 1.0, L1Norm()))
        assert gn.iters == 0 and tr.iters == 0
        assert du.gap <= 1e-9

    def test_truncated_with_regularizer_goes_through_dual(self):
        """The truncated closed form only covers h = 0; with an l1 term the
        generic path must produce the same minimizer it would get from a grid."""
        m = _model([1.0], [2.0], [[1.0]], 1.0, TruncatedIdentity(0.0),
                   L1Regularizer(0.3))
        sol = solve(m)
        x_grid, _ = oracles.grid_minimize_model(m)
        assert_allclose(sol.x_plus, x_grid, atol=1e-3)


class TestGaussNewton:
    def test_zero_estimate(self):
        rng = np.random.default_rng(0)
        x_bar = rng.normal(size=4)
        J = rng.normal(size=(2, 4))
        sol = solve_gauss_newton(_model(x_bar, np.zeros(2), J, 1.5, SquaredNorm(1.0)))
        assert_allclose(sol.x_plus, x_bar, atol=1e-12)

    def test_scalar_instance(self):
        """g=1, J=1, M=1, coeff 1/2: minimize 0.5(1+d)^2 + 0.5 d^2 -> d = -1/2."""
        sol = solve_gauss_newton(_model([0.0], [1.0], [[1.0]], 1.0, SquaredNorm(0.5)))
        assert_allclose(sol.x_plus, [-0.5], atol=1e-12)

    def test_stationarity_random_instance(self):
        """Gradient of the model vanishes at the returned point (5x3)."""
        rng = np.random.default_rng(42)
        g = rng.normal(size=5)
        J = rng.normal(size=(5, 3))
        x_bar = rng.normal(size=3)
        M, c = 0.8, 1.3
        sol = solve_gauss_newton(_model(x_bar, g, J, M, SquaredNorm(c)))
        d = sol.x_plus - x_bar
        grad = 2.0 * c * J.T @ (g + J @ d) + M * d
        assert np.linalg.norm(grad) <= 1e-10

    def test_wide_system_matches_tall_formula(self):
        """m < n takes the m x m system; answer equals the n x n solve."""
        rng = np.random.default_rng(3)
        g = rng.normal(size=2)
        J = rng.normal(size=(2, 5))
        x_bar = rng.normal(size=5)
        M, c = 1.1, 0.9
        sol = solve_gauss_newton(_model(x_bar, g, J, M, SquaredNorm(c)))
        A = 2.0 * c * (J.T @ J) + M * np.eye(5)
        d = np.linalg.solve(A, -2.0 * c * J.T @ g)
        assert_allclose(sol.x_plus, x_bar + d, atol=1e-10)

    def test_rejects_wrong_structure(self):
        with pytest.raises(ConfigError):
            solve_gauss_newton(_model([0.0], [1.0], [[1.0]], 1.0, L1Norm()))


class TestTruncated:
    def test_zero_slack_keeps_anchor(self):
        sol = solve_truncated(_model([2.0, 1.0], [0.3], [[1.0, 1.0]], 1.0,
                                     TruncatedIdentity(0.3)))
        assert_allclose(sol.x_plus, [2.0, 1.0])

    def test_large_slack_caps_step_at_unit_over_m(self):
        """slack = 10, ||J||^2 = 1, M = 1: min{1/M, slack} = 1 -> full row step."""
        sol = solve_truncated(_model([0.0, 0.0], [10.0], [[1.0, 0.0]], 1.0,
                                     TruncatedIdentity(0.0)))
        assert_allclose(sol.x_plus, [-1.0, 0.0])

    def test_small_slack_uses_ratio(self):
        """slack = 0.25, ||J||^2 = 1, M = 1 -> step factor 0.25."""
        sol = solve_truncated(_model([0.0], [0.25], [[1.0]], 1.0,
                                     TruncatedIdentity(0.0)))
        assert_allclose(sol.x_plus, [-0.25])

    def test_degenerate_jacobian_flag(self):
        sol = solve_truncated(_model([1.0], [5.0], [[0.0]], 1.0,
                                     TruncatedIdentity(0.0)))
        assert sol.degenerate
        assert_allclose(sol.x_plus, [1.0])
        below = solve_truncated(_model([1.0], [-5.0], [[0.0]], 1.0,
                                       TruncatedIdentity(0.0)))
        assert not below.degenerate

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            m = _model(rng.normal(size=2), [float(rng.uniform(-1, 2))],
                       rng.normal(size=(1, 2)), float(rng.uniform(0.5, 3.0)),
                       TruncatedIdentity(float(rng.uniform(-0.5, 0.5))))
            sol = solve_truncated(m)
            x_grid, val_grid = oracles.grid_minimize_model(m)
            assert model_value(m, sol.x_plus) <= val_grid + 1e-8
            assert_allclose(sol.x_plus, x_grid, atol=1e-3)


class TestDualSolve:
    def test_l1_with_zero_jacobian_decouples(self):
        """J = 0 splits the model: y* is the sign pattern of g, x* = prox(x_bar)."""
        x_bar = np.array([2.0, -1.0])
        g = np.array([1.5, -0.2, 0.0])
        m = _model(x_bar, g, np.zeros((3, 2)), 1.0, L1Norm(), L1Regularizer(0.5))
        sol = solve_dual(m, 1e-9, 1000)
        assert_allclose(sol.x_plus, [1.5, -0.5], atol=1e-9)
        assert_allclose(sol.dual_y, np.sign(g), atol=1e-9)

    def test_one_dimensional_l1_grid(self):
        """g=2, J=1, M=1: moving d=-1 trades |2+d| against d^2/2; optimum d=-1."""
        m = _model([0.0], [2.0], [[1.0]], 1.0, L1Norm())
        sol = solve_dual(m, 1e-10, 10_000)
        x_grid, val_grid = oracles.grid_minimize_model(m)
        assert_allclose(sol.x_plus, x_grid, atol=1e-3)
        assert_allclose(sol.x_plus, [-1.0], atol=1e-6)
        assert_allclose(model_value(m, sol.x_plus), 1.5, atol=1e-8)
        assert_allclose(val_grid, 1.5, atol=1e-6)

    def test_max_over_simplex_matches_long_run(self):
        """A tight-tolerance run agrees with a long-run dual solve to 1e-6."""
        rng = np.random.default_rng(42)
        for _ in range(10):
            m = _model(rng.normal(size=2), rng.normal(size=2),
                       rng.normal(size=(2, 2)), float(rng.uniform(0.5, 2.0)),
                       MaxCoordinate(), SimplexIndicator(2))
            sol = solve_dual(m, 1e-9, 100_000)
            ref = solve_dual(m, 1e-13, 2_000_000)
            assert_allclose(sol.x_plus, ref.x_plus, atol=1e-6)

    def test_euclidean_gap_and_candidates(self):
        """Gap certificate holds and the answer beats 10^4 random points."""
        rng = np.random.default_rng(7)
        m = _model(rng.normal(size=3), rng.normal(size=2),
                   rng.normal(size=(2, 3)), 1.3, EuclideanNorm())
        sol = solve_dual(m, 1e-9, 100_000)
        assert sol.gap <= 1e-9
        val = model_value(m, sol.x_plus)
        cands = sol.x_plus + rng.normal(scale=0.7, size=(10_000, 3))
        for c in cands:
            assert val <= model_value(m, c) + 1e-9

    def test_gap_bounds_suboptimality(self):
        """Reported gap >= model(x_plus) - best candidate value."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = _model(rng.normal(size=2), rng.normal(size=2),
                       rng.normal(size=(2, 2)), 1.0, L1Norm(), L1Regularizer(0.2))
            sol = solve_dual(m, 1e-6, 100_000)
            assert sol.gap >= 0.0
            val = model_value(m, sol.x_plus)
            cands = sol.x_plus + rng.normal(scale=0.3, size=(500, 2))
            best_cand = min(model_value(m, c) for c in cands)
            assert val - best_cand <= sol.gap + 1e-12

    def test_failure_carries_best_pair(self):
        """Exhausting the iteration budget raises but keeps the best pair."""
        rng = np.random.default_rng(42)
        raised = 0
        for _ in range(10):
            m = _model(rng.normal(size=2), rng.normal(size=2),
                       rng.normal(size=(2, 2)), 1.0, MaxCoordinate(),
                       SimplexIndicator(2))
            try:
                solve_dual(m, 1e-13, 5)
            except SubproblemError as err:
                raised += 1
                best = err.best
                assert isinstance(best, SubproblemSolution)
                assert best.gap > 0.0
                assert best.x_plus.shape == (2,)
        assert raised >= 3


class TestPathAgreement:
    def test_gauss_newton_vs_dual(self):
        """Quadratic outer via its conjugate reproduces the closed form (1e-6)."""
        rng = np.random.default_rng(42)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            mm = int(rng.integers(1, 4))
            m = _model(rng.normal(size=n), rng.normal(size=mm),
                       rng.normal(size=(mm, n)), float(rng.uniform(0.5, 3.0)),
                       SquaredNorm(float(rng.uniform(0.3, 2.0))))
            a = solve_gauss_newton(m)
            b = solve_dual(m, 1e-12, 500_000)
            assert_allclose(a.x_plus, b.x_plus, atol=1e-6)

    def test_truncated_vs_hinge_dual(self):
        """max{z, floor} = floor + [z - floor]_+ lifts to the two-row hinge
        outer; both solvers then target the same model."""
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            x_bar = rng.normal(size=n)
            g = float(rng.uniform(-1.0, 2.0))
            J = rng.normal(size=(1, n))
            M = float(rng.uniform(0.5, 3.0))
            floor = float(rng.uniform(-0.5, 0.5))
            a = solve_truncated(_model(x_bar, [g], J, M, TruncatedIdentity(floor)))
            lifted = _model(x_bar, [floor, g - floor], np.vstack([np.zeros(n), J]),
                            M, AffinePlusHinge(1.0))
            b = solve_dual(lifted, 1e-12, 500_000)
            assert_allclose(a.x_plus, b.x_plus, atol=1e-6)


class TestStrongConvexityDecrease:
    def test_decrease_inequality(self):
        """model(x_plus) <= model(x_bar) - (M/2)||x_plus - x_bar||^2 + tol."""
        rng = np.random.default_rng(42)
        for mdl in (oracles.random_model(rng, ok, rk)
                    for ok in oracles.OUTER_KINDS for rk in oracles.REG_KINDS):
            if not np.isfinite(mdl.reg.value(mdl.x_bar)):
                # anchor must be feasible for the decrease statement
                mdl = ProxLinearModel(x_bar=mdl.reg.prox(mdl.x_bar, 1.0),
                                      g_tilde=mdl.g_tilde, J_tilde=mdl.J_tilde,
                                      M=mdl.M, outer=mdl.outer, reg=mdl.reg)
            sol = solve(mdl, tol=1e-9)
            lhs = model_value(mdl, sol.x_plus)
            rhs = model_value(mdl, mdl.x_bar)
            step = sol.x_plus - mdl.x_bar
            assert lhs <= rhs - 0.5 * mdl.M * float(step @ step) + 1e-9
