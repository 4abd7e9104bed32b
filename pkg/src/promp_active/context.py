"""Planar task context: object poses, frame transforms, the grasp-offset GMM,
and the probabilistic link between a task pose and the primitive library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mixture import PrompLibrary, _log_gaussian, _logsumexp
from .promp import PrompParams, condition, marginal_at


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized wrap to (-pi, pi]."""
    return np.pi - (np.pi - np.asarray(theta, dtype=float)) % (2.0 * np.pi)


@dataclass(frozen=True)
class PlanarContext:
    """A task instance: planar object pose (meters, meters, radians)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.theta)):
            raise ValueError("context pose must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class TaskTimestep:
    """Phase at which the task resolves; grasping resolves at the end."""

    phase_star: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.phase_star <= 1.0:
            raise ValueError("phase_star must be in [0, 1]")


@dataclass(frozen=True)
class GraspModel:
    """GMM over end-effector pose offsets expressed in the object frame."""

    betas: np.ndarray
    means: np.ndarray = field(repr=False)
    covs: np.ndarray = field(repr=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if betas.ndim != 1 or means.shape != (betas.size, 3) \
                or covs.shape != (betas.size, 3, 3):
            raise ValueError("grasp model arrays must be (R,), (R,3), (R,3,3)")
        if abs(betas.sum() - 1.0) > 1e-12 or np.any(betas < 0):
            raise ValueError("mixture coefficients must sum to 1")
        for cov in covs:
            np.linalg.cholesky(cov)
        for a in (betas, means, covs):
            a.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def n_components(self) -> int:
        return self.betas.size


def rotation2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def compose_pose(obj: PlanarContext, offset: np.ndarray) -> np.ndarray:
    """Rigid composition of the object pose with an offset in the object frame."""
    offset = np.asarray(offset, dtype=float)
    xy = np.array([obj.x, obj.y]) + rotation2d(obj.theta) @ offset[:2]
    return np.array([xy[0], xy[1], wrap_angle(obj.theta + offset[2])])


def pose_in_object_frame(obj: PlanarContext, pose: np.ndarray) -> np.ndarray:
    """Inverse of compose_pose: express a base-frame pose in the object frame."""
    pose = np.asarray(pose, dtype=float)
    xy = rotation2d(-obj.theta) @ (pose[:2] - np.array([obj.x, obj.y]))
    return np.array([xy[0], xy[1], wrap_angle(pose[2] - obj.theta)])


def transform_cov(obj: PlanarContext, cov: np.ndarray) -> np.ndarray:
    """Rotate a pose covariance from the object frame into the base frame."""
    jac = np.eye(3)
    jac[:2, :2] = rotation2d(obj.theta)
    out = jac @ np.asarray(cov, dtype=float) @ jac.T
    return 0.5 * (out + out.T)


COV_FLOOR = 1e-6


def _kmeans_labels(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def fit_grasp_gmm(points: np.ndarray | list, n_components: int,
                  seed: int = 0) -> GraspModel:
    """EM fit of a full-covariance GMM over 3-D pose offsets.

    Seeded k-means picks the starting partition; every M-step adds a small
    diagonal floor so degenerate clusters stay invertible. Deterministic
    for a fixed seed.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = points.shape[0]
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n < n_components:
        raise ValueError("need at least as many points as components")
    rng = np.random.default_rng(seed)

    centers = points[rng.choice(n, size=n_components, replace=False)]
    for _ in range(25):
        labels = _kmeans_labels(points, centers)
        new_centers = centers.copy()
        for r in range(n_components):
            members = points[labels == r]
            if members.size:
                new_centers[r] = members.mean(axis=0)
        if np.allclose(new_centers, centers):
            break
        centers = new_centers

    labels = _kmeans_labels(points, centers)
    betas = np.full(n_components, 1.0 / n_components)
    means = centers.copy()
    covs = np.empty((n_components, 3, 3))
    for r in range(n_components):
        members = points[labels == r]
        if members.shape[0] > 0:
            betas[r] = members.shape[0] / n
            centered = members - means[r]
            covs[r] = centered.T @ centered / members.shape[0]
        else:
            covs[r] = np.zeros((3, 3))
        covs[r] += COV_FLOOR * np.eye(3)
    betas /= betas.sum()

    prev_ll = -np.inf
    for _ in range(200):
        log_resp = np.empty((n, n_components))
        for r in range(n_components):
            resid = points - means[r]
            chol = np.linalg.cholesky(covs[r])
            white = np.linalg.solve(chol, resid.T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            log_resp[:, r] = np.log(betas[r]) - 0.5 * (
                (white ** 2).sum(axis=0) + logdet + 3 * np.log(2 * np.pi))
        row_max = log_resp.max(axis=1, keepdims=True)
        log_norm = row_max[:, 0] + np.log(np.exp(log_resp - row_max).sum(axis=1))
        ll = float(log_norm.sum())
        resp = np.exp(log_resp - log_norm[:, None])

        weights = resp.sum(axis=0)
        betas = weights / n
        for r in range(n_components):
            means[r] = resp[:, r] @ points / weights[r]
            centered = points - means[r]
            covs[r] = (resp[:, r, None] * centered).T @ centered / weights[r]
            covs[r] = 0.5 * (covs[r] + covs[r].T) + COV_FLOOR * np.eye(3)

        if abs(ll - prev_ll) < 1e-10 * (1.0 + abs(ll)):
            break
        prev_ll = ll

    return GraspModel(betas=betas, means=means, covs=covs)


def _log_gaussian_wrapped(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Gaussian log density with the angle residual wrapped to (-pi, pi]."""
    resid = np.asarray(x, dtype=float) - mean
    resid[2] = wrap_angle(resid[2])
    return _log_gaussian(resid + mean, mean, cov)


def log_p_task_given_class(eta: PlanarContext, j: int, lib: PrompLibrary,
                           gm: GraspModel, t: TaskTimestep) -> float:
    """Log achievability of a task pose under one primitive.

    Each grasp component is transformed into the base frame, used to
    condition the primitive at the task phase, and scored by the density
    of the conditioned state marginal at the conditioning point.
    """
    p = lib.components[j]
    terms = np.empty(gm.n_components)
    for r in range(gm.n_components):
        y_r = compose_pose(eta, gm.means[r])
        cov_r = transform_cov(eta, gm.covs[r])
        post = condition(p, t.phase_star, y_r, cov_r, lib.cfg)
        marg = marginal_at(post, t.phase_star, lib.cfg)
        terms[r] = _log_gaussian_wrapped(y_r, marg.mean, marg.cov)
    with np.errstate(divide="ignore"):
        return _logsumexp(np.log(gm.betas) + terms)


def p_task_given_class(eta: PlanarContext, j: int, lib: PrompLibrary,
                       gm: GraspModel, t: TaskTimestep) -> float:
    return float(np.exp(log_p_task_given_class(eta, j, lib, gm, t)))


def class_posterior(eta: PlanarContext, lib: PrompLibrary, gm: GraspModel,
                    t: TaskTimestep) -> np.ndarray:
    """Posterior over primitives for a task pose, uniform prior.

    Computed in log space; if every likelihood underflows the posterior
    falls back to uniform.
    """
    if not lib.components:
        raise ValueError("library is empty")
    logs = np.array([log_p_task_given_class(eta, j, lib, gm, t)
                     for j in range(len(lib.components))])
    norm = _logsumexp(logs)
    if not np.isfinite(norm):
        return np.full(len(lib.components), 1.0 / len(lib.components))
    post = np.exp(logs - norm)
    return post / post.sum()


def _state_distances(eta: PlanarContext, lib: PrompLibrary, gm: GraspModel,
                     t: TaskTimestep) -> np.ndarray:
    """Mahalanobis distance of each transformed grasp mean to each primitive's
    unconditioned state marginal at the task phase; shape (J, R)."""
    out = np.empty((len(lib.components), gm.n_components))
    for j, p in enumerate(lib.components):
        marg = marginal_at(p, t.phase_star, lib.cfg)
        chol = np.linalg.cholesky(marg.cov)
        for r in range(gm.n_components):
            resid = compose_pose(eta, gm.means[r]) - marg.mean
            resid[2] = wrap_angle(resid[2])
            white = np.linalg.solve(chol, resid)
            out[j, r] = np.sqrt(white @ white)
    return out


def context_mahalanobis(eta: PlanarContext, j: int, lib: PrompLibrary,
                        gm: GraspModel, t: TaskTimestep) -> float:
    """Distance of a task pose to one primitive: best grasp component wins."""
    marg = marginal_at(lib.components[j], t.phase_star, lib.cfg)
    chol = np.linalg.cholesky(marg.cov)
    best = np.inf
    for r in range(gm.n_components):
        resid = compose_pose(eta, gm.means[r]) - marg.mean
        resid[2] = wrap_angle(resid[2])
        white = np.linalg.solve(chol, resid)
        best = min(best, float(np.sqrt(white @ white)))
    return best


def best_execution(eta: PlanarContext, lib: PrompLibrary, gm: GraspModel,
                   t: TaskTimestep) -> tuple[int, int, PrompParams]:
    """Pick the (primitive, grasp component) pair closest in state Mahalanobis
    distance and return the primitive conditioned on that grasp target."""
    if not lib.components:
        raise ValueError("library is empty")
    dists = _state_distances(eta, lib, gm, t)
    j, r = np.unravel_index(np.argmin(dists), dists.shape)
    y_r = compose_pose(eta, gm.means[r])
    cov_r = transform_cov(eta, gm.covs[r])
    conditioned = condition(lib.components[j], t.phase_star, y_r, cov_r, lib.cfg)
    return int(j), int(r), conditioned
