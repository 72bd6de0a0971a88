"""2-D Gaussian toy problem for checking WGAN-GP dynamics."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .networks import MlpCritic, MlpGenerator

TOY_MEAN = np.array([1.5, -0.5])
TOY_COV = np.array([[0.5, 0.2], [0.2, 0.3]])


def toy_samples(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).multivariate_normal(TOY_MEAN, TOY_COV, size=n)


def toy_networks(seed: int = 0) -> tuple[MlpGenerator, MlpCritic]:
    """A small generator against a wider critic; see the notes on why these sizes."""
    return (MlpGenerator(2, (2,), hidden=(16,), squash=False, seed=seed),
            MlpCritic(2, hidden=(64, 64), seed=seed))


def energy_distance(a, b) -> float:
    """2 E|X - Y| - E|X - X'| - E|Y - Y'| with Euclidean distances (V-statistic)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(2 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean())
