"""Proximal operators, projections, and the power-iteration spectral norm.

Small pure-numpy primitives shared by the regularizers, the outer-function
conjugate domains, and the subproblem solvers.
"""

import numpy as np


def prox_l1(v, t, lam):
    """Soft-threshold: argmin_u lam*||u||_1 + ||u - v||^2 / (2t), coordinatewise."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t * lam, 0.0)


def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort-and-threshold).

    Sorts in descending order, finds the largest k with u_k > (cumsum_k - 1)/k,
    and clips at that threshold.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    counts = np.arange(1, v.size + 1)
    k = np.nonzero(u * counts > cumulative)[0][-1]
    theta = cumulative[k] / (k + 1.0)
    return np.maximum(v - theta, 0.0)


def project_linf_ball(v, r):
    """Clamp each coordinate of v to [-r, r]."""
    return np.clip(np.asarray(v, dtype=np.float64), -r, r)


def spectral_norm(J):
    """Largest singular value of a dense matrix via power iteration.

    Iterates on J J^T or J^T J, whichever is smaller, for at most 200 steps
    or until the Rayleigh quotient's relative change drops below 1e-12.
    The starting vector is a deterministic ramp so results are reproducible.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.ndim == 1:
        J = J[None, :]
    m, n = J.shape
    B = J @ J.T if m <= n else J.T @ J
    k = B.shape[0]
    v = 1.0 + 0.01 * np.arange(k)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(200):
        w = B @ v
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            return 0.0
        new_rayleigh = float(v @ w)
        v = w / wnorm
        if abs(new_rayleigh - rayleigh) <= 1e-12 * max(1.0, abs(new_rayleigh)):
            rayleigh = new_rayleigh
            break
        rayleigh = new_rayleigh
    return float(np.sqrt(max(rayleigh, 0.0)))
