"""Shared random-matrix helpers for the test suite."""

import numpy as np


def philox(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def rand_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def rand_with_sigma(rng: np.random.Generator, sigma) -> np.ndarray:
    """Random real matrix with the given singular values."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    return rand_orthogonal(rng, n) @ np.diag(sigma) @ rand_orthogonal(rng, n)


def rand_spd(rng: np.random.Generator, n: int, lo: float = 0.5,
             hi: float = 1.5) -> np.ndarray:
    eigs = rng.uniform(lo, hi, size=n)
    basis = rand_orthogonal(rng, n)
    return basis @ np.diag(eigs) @ basis.T
