import itertools

import numpy as np
import pytest

from hdma.data import Dataset
from hdma.weights import FitBundle, cv_value


def simplex_projection_oracle(v):
    """Exhaustive face enumeration: best feasible affine-hull projection."""
    v = np.asarray(v, dtype=float)
    K = v.size
    best, best_d = None, np.inf
    for r in range(1, K + 1):
        for S in itertools.combinations(range(K), r):
            S = list(S)
            w = np.zeros(K)
            w[S] = v[S] - (v[S].sum() - 1.0) / r
            if np.all(w[S] >= 0):
                d = np.sum((w - v) ** 2)
                if d < best_d:
                    best, best_d = w, d
    return best


def quadratic_instance(rng, n=200, K=None):
    """Squared-loss CV instance: K noisy rescaled copies of one signal."""
    K = int(rng.integers(3, 11)) if K is None else K
    signal = 2.0 * rng.standard_normal(n)
    y = signal + 0.5 * rng.standard_normal(n)
    Z = np.empty((n, K))
    for k in range(K):
        Z[:, k] = rng.uniform(0.3, 1.2) * signal + rng.uniform(0.1, 1.0) * rng.standard_normal(n)
    return FitBundle(Z, y)


def brute_force_simplex_min(fb):
    """Minimize the squared-loss CV over the simplex by active-set enumeration.

    Every support S gets its equality-constrained least-squares solution
    from the KKT system; the best one with nonnegative weights wins.
    """
    Z, y, K = fb.Z, fb.y, fb.K
    H = Z.T @ Z
    b = Z.T @ y
    best = None
    for r in range(1, K + 1):
        for S in itertools.combinations(range(K), r):
            S = list(S)
            A = np.zeros((r + 1, r + 1))
            A[:r, :r] = H[np.ix_(S, S)]
            A[:r, r] = 1.0
            A[r, :r] = 1.0
            try:
                sol = np.linalg.solve(A, np.r_[b[S], 1.0])
            except np.linalg.LinAlgError:
                continue
            w = np.zeros(K)
            w[S] = sol[:r]
            if np.all(w >= -1e-14):
                w = np.maximum(w, 0.0)
                val = cv_value(w, fb)
                if best is None or val < best[0]:
                    best = (val, w)
    return best


def linear_data(rng, n=100, p=20, beta=None, sigma=0.5):
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
        beta[:3] = [2.0, -1.0, 1.0]
    return Dataset(X @ beta + sigma * rng.standard_normal(n), X), beta


def logistic_data(rng, n=200, p=10, beta=None):
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
        beta[:2] = [1.5, -1.0]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-X @ beta))).astype(float)
    return Dataset(y, X), beta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
