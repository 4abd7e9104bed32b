"""Normalized radial basis features over a phase variable in [0, 1].

Every trajectory operation in the package goes through the block-diagonal
feature matrix built here: one identical row of normalized Gaussian RBFs
per state dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BasisConfig:
    """Configuration of the RBF feature system.

    n_basis: basis functions per state dimension.
    state_dim: number of state dimensions d.
    bandwidth: squared-phase width h of each Gaussian bump.
    centers: basis centers in [0, 1], strictly increasing.
    """

    n_basis: int
    state_dim: int
    bandwidth: float
    centers: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_basis < 1:
            raise ValueError("n_basis must be >= 1")
        if self.state_dim < 1:
            raise ValueError("state_dim must be >= 1")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        centers = np.asarray(self.centers, dtype=float)
        if centers.shape != (self.n_basis,):
            raise ValueError("centers must have length n_basis")
        if self.n_basis >= 2:
            if np.any(np.diff(centers) <= 0):
                raise ValueError("centers must be strictly increasing")
            if centers[0] != 0.0 or centers[-1] != 1.0:
                raise ValueError("centers must start at 0 and end at 1")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @classmethod
    def default(cls, n_basis: int = 10, state_dim: int = 3) -> "BasisConfig":
        """Evenly spaced centers; bandwidth half the squared center spacing."""
        if n_basis == 1:
            return cls(n_basis=1, state_dim=state_dim, bandwidth=1.0,
                       centers=np.array([0.5]))
        centers = np.linspace(0.0, 1.0, n_basis)
        spacing = centers[1] - centers[0]
        return cls(n_basis=n_basis, state_dim=state_dim,
                   bandwidth=0.5 * spacing ** 2, centers=centers)


def rbf_features(phase: float, cfg: BasisConfig) -> np.ndarray:
    """Normalized Gaussian RBF activations at one phase, summing to 1."""
    if not 0.0 <= phase <= 1.0:
        raise ValueError(f"phase must be in [0, 1], got {phase}")
    raw = np.exp(-((phase - cfg.centers) ** 2) / (2.0 * cfg.bandwidth))
    return raw / raw.sum()


def feature_matrix(phase: float, cfg: BasisConfig) -> np.ndarray:
    """Block-diagonal d x (d*n) feature matrix with one RBF row per dimension."""
    return np.kron(np.eye(cfg.state_dim), rbf_features(phase, cfg))


def basis_matrix(phases: np.ndarray, cfg: BasisConfig) -> np.ndarray:
    """Stacked RBF rows for many phases, shape (len(phases), n_basis)."""
    phases = np.asarray(phases, dtype=float)
    if np.any(phases < 0.0) or np.any(phases > 1.0):
        raise ValueError("phases must be in [0, 1]")
    raw = np.exp(-((phases[:, None] - cfg.centers[None, :]) ** 2)
                 / (2.0 * cfg.bandwidth))
    return raw / raw.sum(axis=1, keepdims=True)


def phase_schedule(n_timesteps: int) -> np.ndarray:
    """Evenly spaced phases from 0 to 1 inclusive."""
    if n_timesteps < 2:
        raise ValueError("n_timesteps must be >= 2")
    return np.linspace(0.0, 1.0, n_timesteps)
