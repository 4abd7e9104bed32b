"""Incremental library of movement primitives.

New demonstrations are routed to the closest primitive in Mahalanobis
distance when they fall under its sampled disparity threshold, otherwise
they seed a new primitive. Component parameters follow the running-mean /
covariance-blend update, and mixture coefficients track sample counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisConfig, phase_schedule
from .promp import (PrompParams, Trajectory, default_obs_noise, init_promp,
                    marginal_at, sample_weights)


@dataclass(frozen=True)
class LearnerHyper:
    """Hyperparameters of the incremental learner.

    gamma: scale of the uninformative initial weight covariance.
    sigma0: scale of the initial covariance prior bookkeeping entry.
    map_lambda: blend factor between covariance prior and sample scatter.
    mad_beta: outlier cut in MAD units when sampling disparity thresholds.
    n_threshold_samples: weight samples drawn per threshold computation.
    ridge: regression regularizer for weight fitting.
    seed: seed for the threshold sampling stream.
    """

    gamma: float = 1.0
    sigma0: float = 1e-4
    map_lambda: float = 0.5
    mad_beta: float = 2.5
    n_threshold_samples: int = 100
    ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0 or self.sigma0 <= 0:
            raise ValueError("gamma and sigma0 must be positive")
        if not 0.0 < self.map_lambda < 1.0:
            raise ValueError("map_lambda must be in (0, 1)")
        if self.mad_beta <= 0:
            raise ValueError("mad_beta must be positive")
        if self.n_threshold_samples < 1:
            raise ValueError("n_threshold_samples must be >= 1")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")


@dataclass(frozen=True)
class PrompLibrary:
    """Ordered primitives with mixture coefficients and per-component samples.

    Immutable snapshot: every update returns a new library, so scoring may
    fan out over a snapshot while a single writer incorporates demonstrations.
    """

    components: tuple[PrompParams, ...]
    sample_sets: tuple[np.ndarray, ...] = field(repr=False)
    mix_coeffs: np.ndarray = field(repr=False)
    cfg: BasisConfig = field(repr=False)
    hyper: LearnerHyper = field(repr=False)
    obs_noise: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.components) != len(self.sample_sets):
            raise ValueError("components and sample_sets must align")
        coeffs = np.asarray(self.mix_coeffs, dtype=float)
        if coeffs.size != len(self.components):
            raise ValueError("mix_coeffs must align with components")
        if self.components:
            if np.any(coeffs < 0) or abs(coeffs.sum() - 1.0) > 1e-12:
                raise ValueError("mix_coeffs must be a probability vector")
        coeffs.setflags(write=False)
        object.__setattr__(self, "mix_coeffs", coeffs)

    @classmethod
    def empty(cls, cfg: BasisConfig, hyper: LearnerHyper | None = None,
              obs_noise: np.ndarray | None = None) -> "PrompLibrary":
        hyper = hyper or LearnerHyper()
        if obs_noise is None:
            obs_noise = default_obs_noise(cfg.state_dim)
        return cls(components=(), sample_sets=(), mix_coeffs=np.zeros(0),
                   cfg=cfg, hyper=hyper, obs_noise=np.asarray(obs_noise, float))

    def __len__(self) -> int:
        return len(self.components)


def mahalanobis_w(w: np.ndarray, p: PrompParams) -> float:
    """Mahalanobis distance of a weight vector to one primitive distribution."""
    resid = np.asarray(w, dtype=float) - p.mean_w
    chol = np.linalg.cholesky(p.cov_w)
    white = np.linalg.solve(chol, resid)
    return float(np.sqrt(white @ white))


def mad_filter(distances: np.ndarray, beta: float) -> float:
    """Largest distance surviving the MAD outlier cut.

    Keeps d with (d - median) / MAD < beta and returns the max kept value;
    a zero MAD (degenerate spread) falls back to the median itself.
    """
    distances = np.asarray(distances, dtype=float)
    med = float(np.median(distances))
    mad = float(np.median(np.abs(distances - med)))
    if mad == 0.0:
        return med
    kept = distances[(distances - med) / mad < beta]
    return float(kept.max())


def mad_threshold(p: PrompParams, hyper: LearnerHyper) -> float:
    """Disparity threshold from seeded self-samples of the primitive."""
    samples = sample_weights(p, hyper.n_threshold_samples, seed=hyper.seed)
    distances = np.array([mahalanobis_w(w, p) for w in samples])
    return mad_filter(distances, hyper.mad_beta)


def route_demonstration(lib: PrompLibrary, w: np.ndarray) -> int | None:
    """Index of the closest primitive whose threshold admits w, else None (new)."""
    best: int | None = None
    best_d = np.inf
    for j, p in enumerate(lib.components):
        d = mahalanobis_w(w, p)
        if d <= mad_threshold(p, lib.hyper) and d < best_d:
            best, best_d = j, d
    return best


def incorporate(lib: PrompLibrary, w: np.ndarray) -> PrompLibrary:
    """Return the library updated with one fitted demonstration weight vector.

    Routed components get the exact sample-mean update and a covariance that
    blends the previous estimate with the sample scatter; unrouted weights
    seed a fresh primitive. Coefficients are recomputed as count fractions.
    """
    w = np.asarray(w, dtype=float)
    j = route_demonstration(lib, w)
    components = list(lib.components)
    sample_sets = list(lib.sample_sets)
    if j is None:
        components.append(init_promp(w, lib.hyper.gamma, lib.hyper.sigma0,
                                     lib.obs_noise))
        sample_sets.append(w[None, :])
    else:
        samples = np.vstack([sample_sets[j], w[None, :]])
        n = samples.shape[0]
        mean = samples.mean(axis=0)
        centered = samples - mean
        scatter = centered.T @ centered / n
        lam = lib.hyper.map_lambda
        cov = lam * components[j].cov_w + (1.0 - lam) * scatter
        cov = 0.5 * (cov + cov.T)
        components[j] = PrompParams(mean_w=mean, cov_w=cov, n_samples=n,
                                    prev_cov=cov, obs_noise=components[j].obs_noise)
        sample_sets[j] = samples
    counts = np.array([s.shape[0] for s in sample_sets], dtype=float)
    return PrompLibrary(components=tuple(components),
                        sample_sets=tuple(sample_sets),
                        mix_coeffs=counts / counts.sum(),
                        cfg=lib.cfg, hyper=lib.hyper, obs_noise=lib.obs_noise)


def _log_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    resid = x - mean
    chol = np.linalg.cholesky(cov)
    white = np.linalg.solve(chol, resid)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return float(-0.5 * (white @ white + logdet + x.size * np.log(2.0 * np.pi)))


def _logsumexp(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    m = values.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(values - m).sum()))


def log_traj_density(lib: PrompLibrary, traj: Trajectory) -> float:
    """Log mixture density of a trajectory under the library.

    Per component the trajectory factorizes over per-phase state marginals;
    components combine by log-sum-exp with the mixture coefficients.
    """
    if not lib.components:
        raise ValueError("library is empty")
    phases = phase_schedule(traj.n_timesteps)
    per_component = np.empty(len(lib.components))
    for j, p in enumerate(lib.components):
        total = 0.0
        for t, phase in enumerate(phases):
            marg = marginal_at(p, phase, lib.cfg)
            total += _log_gaussian(traj.states[t], marg.mean, marg.cov)
        per_component[j] = total
    with np.errstate(divide="ignore"):
        return _logsumexp(np.log(lib.mix_coeffs) + per_component)
