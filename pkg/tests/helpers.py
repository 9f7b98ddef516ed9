"""Shared oracle helpers for the test suite.

Everything here is an independent verification route: finite differences,
direct summation, quadrature wrappers and synthetic trajectory builders.
None of it calls back into the code paths under test.
"""

import numpy as np

from entroflow.family import DiscreteSpace, TabulatedFamily
from entroflow.flow import Trajectory, TrajectorySample


def fd_gradient(f, x, step=1e-5):
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = step * (abs(x[i]) + 1.0)
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def fd_hessian(f, x, step=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    h = step * (np.abs(x) + 1.0)
    center = f(x)
    hess = np.empty((n, n))
    for i in range(n):
        xp = x.copy()
        xp[i] += h[i]
        xm = x.copy()
        xm[i] -= h[i]
        hess[i, i] = (f(xp) - 2.0 * center + f(xm)) / h[i] ** 2
        for j in range(i + 1, n):
            xpp = x.copy(); xpp[i] += h[i]; xpp[j] += h[j]
            xpm = x.copy(); xpm[i] += h[i]; xpm[j] -= h[j]
            xmp = x.copy(); xmp[i] -= h[i]; xmp[j] += h[j]
            xmm = x.copy(); xmm[i] -= h[i]; xmm[j] -= h[j]
            val = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j])
            hess[i, j] = val
            hess[j, i] = val
    return hess


def random_tabulated(rng, n_dim=None, n_points=None):
    """A random small tabulated family (full-rank statistics a.s.)."""
    if n_dim is None:
        n_dim = int(rng.integers(1, 4))
    if n_points is None:
        n_points = int(rng.integers(n_dim + 2, 9))
    points = list(range(n_points))
    weights = rng.uniform(0.5, 2.0, n_points)
    stats = rng.normal(size=(n_dim, n_points))
    return TabulatedFamily(DiscreteSpace(points, weights), stats)


def random_feasible_mean(rng, family, lam_box=1.0):
    """Sample an interior-feasible mean by pushing a random lam forward."""
    lam = rng.uniform(-lam_box, lam_box, family.n_dim)
    return family.mean_parameters(lam)


def synthetic_trajectory(taus, states, lams, entropies, sigmas,
                         status="tau-budget-exhausted"):
    samples = tuple(
        TrajectorySample(
            tau=float(t),
            A=np.atleast_1d(np.asarray(a, dtype=float)),
            lam=np.atleast_1d(np.asarray(l, dtype=float)),
            S=float(s),
            sigma=float(sg),
            speed=1.0,
        )
        for t, a, l, s, sg in zip(taus, states, lams, entropies, sigmas)
    )
    return Trajectory(samples=samples, terminal_status=status)
