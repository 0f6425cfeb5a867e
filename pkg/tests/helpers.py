"""Shared construction helpers for the test suite."""

import numpy as np

from dictad import Dictionary


def random_dictionary(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    return Dictionary(A / np.linalg.norm(A, axis=0))


def planted_instance(m, n, N, s, seed, sigma=0.0, positive=False):
    """Planted s-sparse data Y = D X + noise with coefficient magnitudes
    bounded away from zero. Returns (D_true, X_true, Y)."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, n))
    D /= np.linalg.norm(D, axis=0)
    X = np.zeros((n, N))
    for i in range(N):
        sup = rng.choice(n, s, replace=False)
        vals = rng.uniform(0.5, 1.5, s)
        if not positive:
            vals *= rng.choice([-1.0, 1.0], s)
        X[sup, i] = vals
    Y = D @ X + sigma * rng.standard_normal((m, N))
    return D, X, Y
