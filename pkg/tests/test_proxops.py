"""Tests for the shared proximal/projection kernels.

Each operator is checked against hand-worked values, against a brute-force
grid oracle on low dimensions, and against the variational characterization
(the output must beat every candidate on the implied objective).
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from svrpl.proxops import prox_l1, project_simplex, project_linf_ball, spectral_norm

import oracles


class TestProxL1:
    def test_hand_values(self):
        """Soft threshold shifts magnitudes toward zero by t*lam."""
        assert_allclose(prox_l1(np.array([2.0]), 1.0, 0.5), [1.5])
        assert_allclose(prox_l1(np.array([-0.3]), 1.0, 0.5), [0.0])
        assert_allclose(prox_l1(np.array([-2.0, 0.4, 0.6]), 2.0, 0.25),
                        [-1.5, 0.0, 0.1])

    def test_zero_weight_is_identity(self):
        rng = np.random.default_rng(42)
        v = rng.normal(size=7)
        assert_allclose(prox_l1(v, 1.0, 0.0), v)

    def test_minimizes_objective(self):
        """prox output beats random candidates on 0.5/t||x-v||^2 + lam||x||_1."""
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = rng.integers(1, 6)
            v = rng.normal(scale=2.0, size=n)
            t = float(rng.uniform(0.1, 3.0))
            lam = float(rng.uniform(0.0, 2.0))
            p = prox_l1(v, t, lam)

            def obj(x):
                return 0.5 / t * np.sum((x - v) ** 2) + lam * np.sum(np.abs(x))

            best = obj(p)
            cands = v + rng.normal(scale=0.5, size=(50, n))
            for c in cands:
                assert best <= obj(c) + 1e-12

    def test_shrinkage_formula(self):
        """Componentwise: sign(v) * max(|v| - t*lam, 0)."""
        rng = np.random.default_rng(3)
        v = rng.normal(scale=3.0, size=1000)
        t, lam = 0.7, 1.3
        expected = np.sign(v) * np.maximum(np.abs(v) - t * lam, 0.0)
        assert_allclose(prox_l1(v, t, lam), expected)


class TestProjectSimplex:
    def test_fixed_point(self):
        """Points already on the simplex are unchanged."""
        assert_allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
        assert_allclose(project_simplex(np.array([1.0])), [1.0])

    def test_symmetric_overshoot(self):
        assert_allclose(project_simplex(np.array([1.0, 1.0])), [0.5, 0.5])

    def test_output_is_feasible(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            n = rng.integers(1, 8)
            v = rng.normal(scale=3.0, size=n)
            p = project_simplex(v)
            assert np.all(p >= -1e-15)
            assert_allclose(p.sum(), 1.0, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            v = rng.normal(scale=2.0, size=rng.integers(1, 6))
            p = project_simplex(v)
            assert_allclose(project_simplex(p), p, atol=1e-12)

    def test_against_grid_oracle(self):
        """Matches a fine grid search over the simplex for n = 2 and 3."""
        rng = np.random.default_rng(5)
        for n in (2, 3):
            embed = oracles.simplex_embedding(n, n)
            for _ in range(20):
                v = rng.normal(scale=1.5, size=n)

                def dist(T):
                    X, feasible = embed(T)
                    d = X - v
                    out = np.sum(d * d, axis=1)
                    out[~feasible] = np.inf
                    return out

                center = np.full(n - 1, 1.0 / n)
                t_best, _ = oracles.refine_minimize(dist, center, 1.0,
                                                    lo=np.zeros(n - 1),
                                                    hi=np.ones(n - 1))
                x_best = embed(t_best)[0][0]
                assert_allclose(project_simplex(v), x_best, atol=1e-4)

    def test_closest_point_property(self):
        """Projection is nearer to v than any random feasible point."""
        rng = np.random.default_rng(19)
        for _ in range(300):
            n = rng.integers(2, 7)
            v = rng.normal(scale=2.0, size=n)
            p = project_simplex(v)
            w = rng.dirichlet(np.ones(n))
            assert np.sum((p - v) ** 2) <= np.sum((w - v) ** 2) + 1e-12


class TestProjectLinfBall:
    def test_hand_value(self):
        assert_allclose(project_linf_ball(np.array([2.0, -0.5]), 1.0),
                        [1.0, -0.5])

    def test_clip_formula(self):
        rng = np.random.default_rng(42)
        v = rng.normal(scale=4.0, size=200)
        r = 1.7
        assert_allclose(project_linf_ball(v, r), np.clip(v, -r, r))

    def test_idempotent_and_feasible(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            v = rng.normal(scale=3.0, size=rng.integers(1, 6))
            r = float(rng.uniform(0.1, 2.0))
            p = project_linf_ball(v, r)
            assert np.max(np.abs(p)) <= r + 1e-15
            assert_allclose(project_linf_ball(p, r), p)


class TestSpectralNorm:
    def test_identity(self):
        assert_allclose(spectral_norm(np.eye(3)), 1.0, atol=1e-10)

    def test_diagonal(self):
        assert_allclose(spectral_norm(np.diag([3.0, 1.0])), 3.0, atol=1e-10)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((2, 4))) == 0.0

    def test_against_dense_svd(self):
        """Power iteration agrees with the dense eigensolver to 1e-8."""
        rng = np.random.default_rng(42)
        for _ in range(100):
            rows = rng.integers(1, 7)
            cols = rng.integers(1, 7)
            J = rng.normal(size=(rows, cols))
            expected = np.linalg.svd(J, compute_uv=False)[0]
            assert_allclose(spectral_norm(J), expected, rtol=1e-8, atol=1e-10)

    def test_rectangular_four_by_six(self):
        rng = np.random.default_rng(0)
        J = rng.normal(size=(4, 6))
        expected = np.linalg.norm(J, 2)
        assert_allclose(spectral_norm(J), expected, rtol=1e-8)

    def test_one_dimensional_input(self):
        """A vector is treated as a single-row matrix: norm is its 2-norm."""
        v = np.array([3.0, 4.0])
        assert_allclose(spectral_norm(v), 5.0, atol=1e-10)

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(23)
        J = rng.normal(size=(3, 5))
        s = spectral_norm(J)
        assert_allclose(spectral_norm(2.5 * J), 2.5 * s, rtol=1e-9)
