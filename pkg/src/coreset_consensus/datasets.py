"""Seeded synthetic datasets."""

from __future__ import annotations

import numpy as np

from .netsim import STREAM_DATA, stream


def gaussian_points(n_points: int, dim: int, seed: int = 0) -> np.ndarray:
    """Standard-normal point cloud."""
    return stream(seed, STREAM_DATA).standard_normal((n_points, dim))


def uniform_points(n_points: int, dim: int, seed: int = 0) -> np.ndarray:
    """Points uniform on ``[-1, 1]^dim``."""
    return stream(seed, STREAM_DATA).uniform(-1.0, 1.0, (n_points, dim))


def two_gaussians(n_points: int, dim: int = 2, separation: float = 1.0, std: float = 1.0,
                  seed: int = 0):
    """Two isotropic Gaussian classes centered at ``+-separation * (1, ..., 1)``.

    The first half of the rows is labeled +1, the rest -1.
    """
    rng = stream(seed, STREAM_DATA)
    n_pos = (n_points + 1) // 2
    y = np.r_[np.ones(n_pos), -np.ones(n_points - n_pos)]
    X = rng.normal(scale=std, size=(n_points, dim)) + separation * y[:, None]
    return X, y
