"""Gaussian mixtures on the joint time-by-pose manifold.

A gesture model is a K-component mixture over points ``x = (t, y)`` where
``t`` is the normalized phase in [0,1] (Euclidean factor) and ``y`` a pose
on the configured pose manifold. Densities are the tangent-space Gaussian
approximation: the normalizer is the flat ``(2 pi)^{-D/2} |S|^{-1/2}`` with
``D`` the tangent dimension, which is the standard concentrated-
distribution treatment; no curvature correction is applied.

Fitting is expectation-maximization with Riemannian statistics in the
M-step (weighted Fréchet means, tangent covariances). Initialization bins
points by phase: component k starts from the points with phase in
[k/K, (k+1)/K), the final bin closed at 1. Regression on time (conditioning
the joint mixture at a phase) produces a single blended Gaussian whose mean
is a fixed point of the same Fréchet-type iteration and whose covariance is
assembled in the blended mean's tangent space.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AllZeroDensity,
    EmptyBin,
    MalformedDocument,
    NonIncreasingLikelihood,
    SingularCovariance,
    SingularTimeVariance,
    SpecMismatch,
)
from .manifold import (
    Euclidean,
    ManifoldPoint,
    Product,
    frechet_mean_coords,
    manifold_from_tree,
    tangent_covariance_coords,
)
from .skeleton import PoseEncoding

LOG_2PI = math.log(2.0 * math.pi)
# covariance eigenvalues never fall below this after an M-step; the extra
# 1e-12 keeps the reconstructed matrix above 1e-8 despite eigh rounding
EIG_FLOOR = 1e-8 + 1e-12
MONOTONE_SLACK = 1e-8
MIN_TIME_VARIANCE = 1e-12


@dataclass
class TrainingConfig:
    components: int = 5
    max_iterations: int = 200
    ll_tolerance: float = 1e-6
    regularization: float = 1e-6
    seed: int = 0  # reserved for stochastic initializers; binning is deterministic

    def __post_init__(self):
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.ll_tolerance < 0 or self.regularization < 0:
            raise ValueError("tolerances must be non-negative")


@dataclass
class TrainingMeta:
    demo_count: int
    iterations: int
    final_avg_log_likelihood: float


@dataclass
class GmmPoint:
    """A joint observation: phase plus pose."""

    time: float
    pose: ManifoldPoint

    def as_point(self):
        spec = joint_manifold(self.pose.spec)
        return ManifoldPoint(spec, np.concatenate([[self.time], self.pose.coords]))


def joint_manifold(pose_spec):
    return Product([Euclidean(1), pose_spec])


@dataclass(eq=False)
class GmmModel:
    spec: object  # joint manifold Product(Euclidean(1), pose manifold)
    encoding: PoseEncoding
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, embed_dim)
    covariances: np.ndarray  # (K, D, D) in each mean's tangent frame
    training_meta: TrainingMeta = None
    ll_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def components(self):
        return self.weights.shape[0]

    @property
    def pose_manifold(self):
        return self.spec.factors[1]

    def validate(self):
        k = self.components
        if k < 1:
            raise ValueError("model needs at least one component")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise ValueError("component weights must be a distribution")
        if self.means.shape != (k, self.spec.embed_dim):
            raise ValueError("means shape mismatch")
        d = self.spec.tangent_dim
        if self.covariances.shape != (k, d, d):
            raise ValueError("covariances shape mismatch")
        for j in range(k):
            if not self.spec.contains(self.means[j]):
                raise ValueError(f"mean {j} is not on the manifold")
            cov = self.covariances[j]
            if np.abs(cov - cov.T).max() > 1e-12:
                raise ValueError(f"covariance {j} is not symmetric")
            if np.linalg.eigvalsh(cov).min() < 1e-8 * (1 - 1e-9):
                raise ValueError(f"covariance {j} is below the eigenvalue floor")
        return self


def _chol(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from None


def log_density_many(manifold, mean, cov, pts):
    """Tangent-space Gaussian log density of each coordinate row."""
    u = manifold.log_many(mean, pts)
    chol = _chol(cov)
    sol = scipy.linalg.solve_triangular(chol, u.T, lower=True)
    quad = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    d = manifold.tangent_dim
    return -0.5 * (d * LOG_2PI + logdet + quad)


def gaussian_density(x, mean, covariance):
    """Density of ``x`` under the tangent-space Gaussian at ``mean``."""
    if isinstance(x, GmmPoint):
        x = x.as_point()
    if x.spec != mean.spec:
        raise SpecMismatch("point and mean live on different manifolds")
    cov = np.asarray(covariance, dtype=np.float64)
    return float(np.exp(log_density_many(mean.spec, mean.coords, cov, x.coords[None, :])[0]))


def _component_log_densities(model, pts):
    """(N, K) array of log(weight_k) + log N_k(x)."""
    n = pts.shape[0]
    out = np.empty((n, model.components))
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    for k in range(model.components):
        out[:, k] = logw[k] + log_density_many(model.spec, model.means[k], model.covariances[k], pts)
    return out


def _logsumexp_rows(a):
    m = np.max(a, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.exp(a - safe[:, None]).sum(axis=1)) + safe
    return np.where(np.isfinite(m), s, m)


def mixture_log_density_many(model, pts):
    """Per-row log of the mixture density (the summand of the sequence score)."""
    return _logsumexp_rows(_component_log_densities(model, pts))


def responsibilities(x, model):
    """Posterior component probabilities for one joint observation."""
    if isinstance(x, GmmPoint):
        x = x.as_point()
    if x.spec != model.spec:
        raise SpecMismatch("observation does not live on the model's joint manifold")
    logs = _component_log_densities(model, x.coords[None, :])[0]
    if not np.any(np.isfinite(logs)):
        raise AllZeroDensity("every component has zero posterior mass at this point")
    logs = logs - logs.max()
    r = np.exp(logs)
    return r / r.sum()


# --- fitting ----------------------------------------------------------------


def normalize_sequence_times(sequence):
    """Phases in [0,1] for one (timestamp, point) sequence."""
    times = np.array([t for t, _ in sequence], dtype=np.float64)
    if times.shape[0] < 2:
        raise ValueError("sequences must contain at least two frames")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sequence timestamps must be strictly increasing")
    return (times - times[0]) / (times[-1] - times[0])


def pool_sequences(sequences, encoding):
    """Stack all demos into joint (phase, pose) coordinate rows."""
    if not sequences:
        raise ValueError("at least one demonstration sequence is required")
    pose_spec = encoding.pose_manifold()
    rows = []
    for seq in sequences:
        phases = normalize_sequence_times(seq)
        for phase, (_, point) in zip(phases, seq):
            if point.spec != pose_spec:
                raise SpecMismatch(
                    f"pose point on {point.spec!r} does not match encoding manifold {pose_spec!r}"
                )
            rows.append(np.concatenate([[phase], point.coords]))
    return np.ascontiguousarray(rows)


def _floor_eigenvalues(cov, floor=EIG_FLOOR):
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    if vals.min() >= floor:
        return (cov + cov.T) / 2.0
    vals = np.maximum(vals, floor)
    fixed = (vecs * vals) @ vecs.T
    return (fixed + fixed.T) / 2.0


def _m_step_component(joint, pts, resp, lam):
    total = resp.sum()
    mean = frechet_mean_coords(joint, pts, resp)
    cov = tangent_covariance_coords(joint, pts, resp, mean)
    cov = cov + lam * np.eye(joint.tangent_dim)
    return total, mean, _floor_eigenvalues(cov)


def fit_em(sequences, config=None, encoding=None):
    """Fit the joint mixture by EM over all pooled demo points.

    The objective (average per-point mixture log likelihood) is verified to
    be non-decreasing at every iteration; a drop beyond 1e-8 aborts, because
    it would mean the manifold statistics are being misapplied.
    """
    config = config or TrainingConfig()
    encoding = encoding or PoseEncoding.from_json({"kind": "directions", "dimension": 2})
    pts = pool_sequences(sequences, encoding)
    joint = joint_manifold(encoding.pose_manifold())
    n = pts.shape[0]
    k = config.components

    bins = np.minimum((pts[:, 0] * k).astype(int), k - 1)
    weights = np.empty(k)
    means = np.empty((k, joint.embed_dim))
    covs = np.empty((k, joint.tangent_dim, joint.tangent_dim))
    for j in range(k):
        members = pts[bins == j]
        if members.shape[0] == 0:
            raise EmptyBin(j, k)
        weights[j] = members.shape[0] / n
        _, means[j], covs[j] = _m_step_component(
            joint, members, np.ones(members.shape[0]), config.regularization
        )

    model = GmmModel(
        spec=joint, encoding=encoding, weights=weights, means=means, covariances=covs
    )

    prev_ll = None
    iterations = 0
    for it in range(config.max_iterations):
        logs = _component_log_densities(model, pts)
        per_point = _logsumexp_rows(logs)
        avg_ll = float(per_point.mean())
        model.ll_history.append(avg_ll)
        if prev_ll is not None:
            delta = avg_ll - prev_ll
            if delta < -MONOTONE_SLACK:
                raise NonIncreasingLikelihood(it, prev_ll, avg_ll)
            if delta < config.ll_tolerance:
                break
        prev_ll = avg_ll

        resp = np.exp(logs - per_point[:, None])
        new_weights = np.empty(k)
        for j in range(k):
            rj = resp[:, j]
            if rj.sum() <= 0.0:
                new_weights[j] = 0.0  # starved component keeps its parameters
                continue
            total, model.means[j], model.covariances[j] = _m_step_component(
                joint, pts, rj, config.regularization
            )
            new_weights[j] = total / n
        model.weights = new_weights / new_weights.sum()
        iterations = it + 1
    else:
        logs = _component_log_densities(model, pts)
        avg_ll = float(_logsumexp_rows(logs).mean())
        model.ll_history.append(avg_ll)
        if prev_ll is not None and avg_ll - prev_ll < -MONOTONE_SLACK:
            raise NonIncreasingLikelihood(config.max_iterations, prev_ll, avg_ll)

    model.training_meta = TrainingMeta(
        demo_count=len(sequences),
        iterations=iterations,
        final_avg_log_likelihood=model.ll_history[-1],
    )
    return model.validate()


# --- regression on time -----------------------------------------------------


@dataclass
class GmrResult:
    mean: ManifoldPoint  # pose manifold point
    covariance: np.ndarray  # (Dp, Dp) in the tangent space at mean
    activations: np.ndarray  # (K,), sums to 1


def gmr_condition(model, t):
    """Condition the joint mixture at phase ``t``: a single pose Gaussian.

    Component posteriors come from the time marginals; each component
    contributes its conditional mean through a Fréchet-type fixed point and
    its conditional covariance transported into the blended mean's tangent
    space (plus the spread of the conditional means themselves).
    """
    if not math.isfinite(t):
        raise ValueError("conditioning phase must be finite")
    pose_m = model.pose_manifold
    k = model.components
    dp = pose_m.tangent_dim

    t_means = model.means[:, 0]
    t_vars = model.covariances[:, 0, 0]
    if np.any(t_vars < MIN_TIME_VARIANCE):
        raise SingularTimeVariance(
            f"component time variance below {MIN_TIME_VARIANCE:g}"
        )

    with np.errstate(divide="ignore"):
        log_h = np.log(model.weights) - 0.5 * (
            LOG_2PI + np.log(t_vars) + (t - t_means) ** 2 / t_vars
        )
    log_h -= log_h.max()
    h = np.exp(log_h)
    h /= h.sum()

    cond_means = np.empty((k, pose_m.embed_dim))
    cond_covs = np.empty((k, dp, dp))
    for j in range(k):
        cov = model.covariances[j]
        cross = cov[1:, 0]
        gain = cross / t_vars[j]
        pose_mean = model.means[j, 1:]
        xi = gain * (t - t_means[j])
        cond_means[j] = pose_m.exp(pose_mean, xi)
        schur = cov[1:, 1:] - np.outer(gain, cross)
        rot = pose_m.transport_matrix(pose_mean, cond_means[j])
        cond_covs[j] = rot @ schur @ rot.T

    blended_mean = frechet_mean_coords(pose_m, cond_means, h)
    blended_cov = np.zeros((dp, dp))
    for j in range(k):
        rot = pose_m.transport_matrix(cond_means[j], blended_mean)
        u = pose_m.log(blended_mean, cond_means[j])
        blended_cov += h[j] * (rot @ cond_covs[j] @ rot.T + np.outer(u, u))
    blended_cov = (blended_cov + blended_cov.T) / 2.0

    return GmrResult(
        mean=ManifoldPoint(pose_m, blended_mean),
        covariance=blended_cov,
        activations=h,
    )


def generate_trajectory(model, frame_count):
    """Reference gesture: the regression evaluated on a uniform phase grid."""
    if frame_count < 2:
        raise ValueError("frame_count must be >= 2")
    times = np.linspace(0.0, 1.0, frame_count)
    out = []
    for t in times:
        res = gmr_condition(model, float(t))
        out.append((float(t), res.mean, res.covariance))
    return out


# --- model file -------------------------------------------------------------


def _format_number(x):
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("model files cannot hold non-finite numbers")
        return format(x, ".17g")
    return repr(x)


def _dump_value(value, parts):
    if isinstance(value, dict):
        parts.append("{")
        for i, (key, val) in enumerate(value.items()):
            if i:
                parts.append(",")
            parts.append(json.dumps(key))
            parts.append(":")
            _dump_value(val, parts)
        parts.append("}")
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, val in enumerate(value):
            if i:
                parts.append(",")
            _dump_value(val, parts)
        parts.append("]")
    elif isinstance(value, bool) or value is None:
        parts.append(json.dumps(value))
    elif isinstance(value, (int, float)):
        parts.append(_format_number(value))
    else:
        parts.append(json.dumps(value))


def dumps_17g(value):
    """Deterministic JSON text with floats at 17 significant digits."""
    parts = []
    _dump_value(value, parts)
    return "".join(parts)


def model_to_json(model):
    doc = {
        "format_version": 1,
        "manifold": model.spec.to_tree(),
        "encoding": model.encoding.to_json(),
        "components": int(model.components),
        "weights": [float(w) for w in model.weights],
        "means": [[float(v) for v in row] for row in model.means],
        "covariances": [[[float(v) for v in row] for row in cov] for cov in model.covariances],
        "training_meta": {
            "demo_count": model.training_meta.demo_count if model.training_meta else 0,
            "iterations": model.training_meta.iterations if model.training_meta else 0,
            "final_avg_log_likelihood": (
                float(model.training_meta.final_avg_log_likelihood) if model.training_meta else 0.0
            ),
        },
    }
    return dumps_17g(doc)


def model_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise MalformedDocument("model file must declare format_version 1")
    try:
        spec = manifold_from_tree(doc["manifold"])
        encoding = PoseEncoding.from_json(doc["encoding"])
        weights = np.asarray(doc["weights"], dtype=np.float64)
        means = np.asarray(doc["means"], dtype=np.float64)
        covs = np.asarray(doc["covariances"], dtype=np.float64)
        meta = TrainingMeta(
            demo_count=int(doc["training_meta"]["demo_count"]),
            iterations=int(doc["training_meta"]["iterations"]),
            final_avg_log_likelihood=float(doc["training_meta"]["final_avg_log_likelihood"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocument(f"model file is missing or mistypes a field: {exc}") from None
    if int(doc["components"]) != weights.shape[0]:
        raise MalformedDocument("component count does not match the weight list")
    model = GmmModel(
        spec=spec, encoding=encoding, weights=weights, means=means, covariances=covs,
        training_meta=meta,
    )
    try:
        return model.validate()
    except ValueError as exc:
        raise MalformedDocument(f"model file violates invariants: {exc}") from None


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
