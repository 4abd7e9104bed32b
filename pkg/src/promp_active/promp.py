"""Single movement primitive: weight fitting, Gaussian weight distribution,
per-phase state marginals, waypoint conditioning, and weight sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisConfig, basis_matrix, feature_matrix, phase_schedule


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Timestamped state sequence; rows are states, columns dimensions."""

    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 timesteps of d-dim states")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory entries must be finite")
        object.__setattr__(self, "states", _frozen(states))

    @property
    def n_timesteps(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class StateGaussian:
    """Gaussian over one trajectory state."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PrompParams:
    """Weight-space Gaussian plus update bookkeeping.

    mean_w, cov_w: the weight distribution.
    n_samples: demonstrations this primitive was estimated from.
    prev_cov: covariance prior used by the next MAP update.
    obs_noise: diagonal observation noise added to state marginals.
    """

    mean_w: np.ndarray = field(repr=False)
    cov_w: np.ndarray = field(repr=False)
    n_samples: int
    prev_cov: np.ndarray = field(repr=False)
    obs_noise: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean_w, dtype=float)
        cov = np.asarray(self.cov_w, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov_w shape must match mean_w")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValueError("cov_w must be symmetric")
        object.__setattr__(self, "mean_w", _frozen(mean))
        object.__setattr__(self, "cov_w", _frozen(0.5 * (cov + cov.T)))
        object.__setattr__(self, "prev_cov", _frozen(self.prev_cov))
        object.__setattr__(self, "obs_noise", _frozen(self.obs_noise))

    @property
    def dim(self) -> int:
        return self.mean_w.size


def default_obs_noise(state_dim: int, scale: float = 1e-4) -> np.ndarray:
    """Diagonal observation noise; keeps state marginals well conditioned."""
    return scale * np.eye(state_dim)


def fit_weights(traj: Trajectory, cfg: BasisConfig, ridge: float = 1e-6) -> np.ndarray:
    """Ridge-regress basis weights from one demonstration.

    Dimensions decouple under the block-diagonal features, so a single
    (n x n) system is factored once and reused for every state dimension.
    """
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    if traj.state_dim != cfg.state_dim:
        raise ValueError("trajectory dimension does not match basis config")
    phi = basis_matrix(phase_schedule(traj.n_timesteps), cfg)
    gram = phi.T @ phi + ridge * np.eye(cfg.n_basis)
    per_dim = np.linalg.solve(gram, phi.T @ traj.states)
    return per_dim.T.reshape(-1)


def init_promp(w: np.ndarray, gamma: float, sigma0: float,
               obs_noise: np.ndarray) -> PrompParams:
    """Fresh primitive from one weight vector with an uninformative covariance."""
    if gamma <= 0 or sigma0 <= 0:
        raise ValueError("gamma and sigma0 must be positive")
    w = np.asarray(w, dtype=float)
    eye = np.eye(w.size)
    return PrompParams(mean_w=w, cov_w=gamma * eye, n_samples=1,
                       prev_cov=sigma0 * eye, obs_noise=np.asarray(obs_noise, float))


def marginal_at(p: PrompParams, phase: float, cfg: BasisConfig) -> StateGaussian:
    """State marginal at one phase: features through the weight Gaussian plus noise."""
    psi = feature_matrix(phase, cfg)
    mean = psi @ p.mean_w
    cov = psi @ p.cov_w @ psi.T + p.obs_noise
    return StateGaussian(mean=mean, cov=0.5 * (cov + cov.T))


def condition(p: PrompParams, phase: float, y_star: np.ndarray,
              cov_star: np.ndarray, cfg: BasisConfig) -> PrompParams:
    """Condition the weight distribution on a desired waypoint.

    Gaussian update with gain K = cov_w psi^T (cov_star + psi cov_w psi^T)^-1;
    a singular innovation covariance raises LinAlgError rather than being
    regularized away.
    """
    psi = feature_matrix(phase, cfg)
    y_star = np.asarray(y_star, dtype=float)
    cov_star = np.asarray(cov_star, dtype=float)
    cross = p.cov_w @ psi.T
    innov_cov = cov_star + psi @ cross
    chol = np.linalg.cholesky(0.5 * (innov_cov + innov_cov.T))
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, cross.T)).T
    mean = p.mean_w + gain @ (y_star - psi @ p.mean_w)
    cov = p.cov_w - gain @ cross.T
    return replace(p, mean_w=mean, cov_w=0.5 * (cov + cov.T))


def sample_weights(p: PrompParams, count: int, seed: int) -> list[np.ndarray]:
    """Seeded i.i.d. draws from the weight Gaussian via its Cholesky factor."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(p.cov_w)
    z = rng.standard_normal((count, p.dim))
    return list(p.mean_w + z @ chol.T)
