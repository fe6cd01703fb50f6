"""Monte Carlo localization of a known mesh against a depth likelihood volume.

Each particle is a six-DoF object pose. A particle is weighted by rendering
the mesh at its pose into a depth image and averaging the volume's
likelihood at the rendered depths. The set is then resampled and jittered,
and the loop repeats until the average weight reaches a threshold.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from . import _kernels
from .camera import PlenopticCamera
from .dlv import DepthLikelihoodVolume
from .errors import InvalidInputError, TotalLikelihoodFailure
from .rasterizer import DepthImage, Pose, TriangleMesh, rasterize_points

logger = logging.getLogger(__name__)

ROTATION_PRIORS = ("so3", "yaw", "fixed")


@dataclass(frozen=True)
class RegionOfInterest:
    """Prior over object poses: a translation box plus a rotation prior.

    Args:
        lower: Minimum corner of the translation box (camera frame, meters).
        upper: Maximum corner. A box collapsed to a point is allowed.
        rotation: ``"so3"`` for uniform orientations, ``"yaw"`` for a uniform
            angle about ``axis`` applied on top of ``base``, or ``"fixed"``
            to always use ``base``.
        axis: Rotation axis for the yaw prior, camera frame.
        base: Scalar-first quaternion of the reference orientation.
    """

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    rotation: str = "so3"
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    base: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(3)
        hi = np.asarray(self.upper, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi < lo):
            raise InvalidInputError(f"invalid ROI box {self.lower} .. {self.upper}")
        if self.rotation not in ROTATION_PRIORS:
            raise InvalidInputError(f"rotation prior must be one of {ROTATION_PRIORS}")
        axis = np.asarray(self.axis, dtype=np.float64)
        if np.linalg.norm(axis) == 0:
            raise InvalidInputError("yaw axis must be nonzero")
        base = np.asarray(self.base, dtype=np.float64)
        if np.linalg.norm(base) == 0:
            raise InvalidInputError("base quaternion must be nonzero")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))
        object.__setattr__(self, "axis", tuple((axis / np.linalg.norm(axis)).tolist()))
        object.__setattr__(self, "base", tuple((base / np.linalg.norm(base)).tolist()))

    @classmethod
    def around(cls, center, half_extent: float, **kwargs) -> "RegionOfInterest":
        c = np.asarray(center, dtype=np.float64)
        return cls(tuple(c - half_extent), tuple(c + half_extent), **kwargs)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def sample_rotations(self, n: int, rng: np.random.Generator) -> Rotation:
        base = Rotation.from_quat(self.base, scalar_first=True)
        if self.rotation == "so3":
            return Rotation.random(n, random_state=rng)
        if self.rotation == "yaw":
            angles = rng.uniform(-math.pi, math.pi, size=n)
            return Rotation.from_rotvec(angles[:, None] * np.asarray(self.axis)) * base
        return Rotation.from_quat(np.tile(self.base, (n, 1)), scalar_first=True)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegionOfInterest":
        if "center" in d:
            return cls.around(d["center"], float(d["half_extent"]),
                              **{k: d[k] for k in ("rotation", "axis", "base") if k in d})
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class Particle:
    pose: Pose
    weight: float


@dataclass
class ParticleSet:
    """Poses stored column-wise: ``translations`` (n, 3), ``quaternions`` (n, 4) scalar-first."""

    translations: np.ndarray
    quaternions: np.ndarray
    weights: np.ndarray
    iteration: int = 0
    rng_seed: int | None = None

    def __post_init__(self):
        self.translations = np.asarray(self.translations, dtype=np.float64).reshape(-1, 3)
        self.quaternions = np.asarray(self.quaternions, dtype=np.float64).reshape(-1, 4)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        n = len(self.translations)
        if n == 0 or len(self.quaternions) != n or len(self.weights) != n:
            raise InvalidInputError("particle arrays must be nonempty and equally long")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise InvalidInputError("particle weights must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.weights)

    def pose(self, k: int) -> Pose:
        q = self.quaternions[k]
        return Pose(self.translations[k], q / np.linalg.norm(q))

    @property
    def particles(self) -> list[Particle]:
        return [Particle(self.pose(k), float(self.weights[k])) for k in range(len(self))]

    def normalized(self) -> "ParticleSet":
        """Copy with weights summing to one.

        Raises:
            TotalLikelihoodFailure: every weight is zero.
        """
        total = math.fsum(self.weights)
        if total <= 0:
            raise TotalLikelihoodFailure("all particle weights are zero")
        return ParticleSet(self.translations.copy(), self.quaternions.copy(),
                           self.weights / total, self.iteration, self.rng_seed)


@dataclass(frozen=True)
class PmclConfig:
    """Filter settings.

    ``stop_threshold`` of None means 0.9 times the largest value in the
    volume. Perturbation stds are multiplied by ``anneal_factor`` every
    ``anneal_every`` iterations (0 disables annealing).
    """

    particle_count: int = 100
    max_iterations: int = 500
    sigma_t: float = 0.005
    sigma_r: float = 0.05
    stop_threshold: float | None = None
    anneal_every: int = 100
    anneal_factor: float = 0.5
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.particle_count < 1 or self.max_iterations < 1 or self.workers < 1:
            raise InvalidInputError("particle_count, max_iterations and workers must be >= 1")
        if self.sigma_t < 0 or self.sigma_r < 0:
            raise InvalidInputError("perturbation stds must be nonnegative")
        if self.anneal_every < 0 or not 0 < self.anneal_factor <= 1:
            raise InvalidInputError("anneal_every >= 0 and anneal_factor in (0, 1] required")

    def sigmas_at(self, iteration: int) -> tuple[float, float]:
        """Perturbation stds used after weighting ``iteration`` (1-based)."""
        if self.anneal_every == 0:
            return self.sigma_t, self.sigma_r
        scale = self.anneal_factor ** (iteration // self.anneal_every)
        return self.sigma_t * scale, self.sigma_r * scale

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PmclConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


class DepthScore(NamedTuple):
    """Average likelihood over ``support`` pixels; ``support == 0`` means no evidence."""

    value: float
    support: int

    @property
    def no_support(self) -> bool:
        return self.support == 0


@dataclass(frozen=True)
class PoseEstimate:
    pose: Pose
    score: float


@dataclass
class LocalizationResult:
    estimate: PoseEstimate
    iterations: int
    converged: bool
    stop_threshold: float
    best_trace: list[float]
    mean_trace: list[float]
    seed: int
    config: PmclConfig
    roi: RegionOfInterest | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pose": self.estimate.pose.to_dict(),
            "score": self.estimate.score,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_threshold": self.stop_threshold,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "roi": None if self.roi is None else self.roi.to_dict(),
            "best_trace": list(self.best_trace),
            "mean_trace": list(self.mean_trace),
            **self.extra,
        }


def _rng(cfg_or_seed) -> np.random.Generator:
    seed = cfg_or_seed.seed if isinstance(cfg_or_seed, PmclConfig) else cfg_or_seed
    return np.random.default_rng(seed)


def init_particles(roi: RegionOfInterest, cfg: PmclConfig,
                   rng: np.random.Generator | None = None) -> ParticleSet:
    """Uniform poses over ``roi`` with equal weights."""
    rng = _rng(cfg) if rng is None else rng
    n = cfg.particle_count
    lo, hi = np.asarray(roi.lower), np.asarray(roi.upper)
    trans = lo + (hi - lo) * rng.random((n, 3))
    quats = roi.sample_rotations(n, rng).as_quat(scalar_first=True).reshape(n, 4)
    return ParticleSet(trans, quats, np.full(n, 1.0 / n), 0, cfg.seed)


def score_depth_image(dlv: DepthLikelihoodVolume, z: DepthImage | np.ndarray,
                      backend: str | None = None) -> DepthScore:
    """Average interpolated likelihood over pixels with a rendered surface,
    volume coverage and a depth inside the label range."""
    depth = z.depth if isinstance(z, DepthImage) else np.asarray(z, dtype=np.float64)
    if depth.shape != dlv.values.shape[:2]:
        raise InvalidInputError(f"depth image {depth.shape} does not match volume {dlv.values.shape[:2]}")
    k = _kernels.resolve(backend)
    total, count = k.score_depth(dlv.values, dlv.labels.values, dlv.coverage,
                                 np.ascontiguousarray(depth))
    if count == 0:
        return DepthScore(0.0, 0)
    return DepthScore(total / count, count)


def systematic_indices(weights: np.ndarray, count: int, u0: float) -> np.ndarray:
    """Low-variance resampling: one offset ``u0`` in [0, 1) strides the CDF in steps of 1/count."""
    w = np.asarray(weights, dtype=np.float64)
    # work in units of 1/count so equal weights give integer steps with no round-off
    scaled = np.cumsum(w * (count / math.fsum(w)))
    scaled[-1] = count
    return np.searchsorted(scaled, u0 + np.arange(count), side="right")


def resample(ps: ParticleSet, rng: np.random.Generator, count: int | None = None) -> ParticleSet:
    """Systematic resampling to ``count`` (default: same size) with uniform weights.

    Raises:
        TotalLikelihoodFailure: every weight is zero.
    """
    if math.fsum(ps.weights) <= 0:
        raise TotalLikelihoodFailure("all particle weights are zero; cannot resample")
    n = len(ps) if count is None else int(count)
    idx = systematic_indices(ps.weights, n, float(rng.random()))
    return ParticleSet(ps.translations[idx], ps.quaternions[idx], np.full(n, 1.0 / n),
                       ps.iteration, ps.rng_seed)


def random_axis_rotations(n: int, sigma_r: float, rng: np.random.Generator) -> Rotation:
    """Rotations with axis uniform on the sphere and angle ~ N(0, sigma_r^2)."""
    axes = rng.standard_normal((n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.normal(0.0, sigma_r, size=n) if sigma_r > 0 else np.zeros(n)
    return Rotation.from_rotvec(axes * angles[:, None])


def perturb(ps: ParticleSet, cfg: PmclConfig, rng: np.random.Generator,
            sigma_t: float | None = None, sigma_r: float | None = None) -> ParticleSet:
    """Jitter translations by N(0, sigma_t^2 I) and compose a small random rotation."""
    st = cfg.sigma_t if sigma_t is None else sigma_t
    sr = cfg.sigma_r if sigma_r is None else sigma_r
    n = len(ps)
    trans = ps.translations.copy()
    quats = ps.quaternions.copy()
    if st > 0:
        trans += rng.normal(0.0, st, size=(n, 3))
    if sr > 0:
        delta = random_axis_rotations(n, sr, rng)
        rot = delta * Rotation.from_quat(quats, scalar_first=True)
        quats = rot.as_quat(scalar_first=True).reshape(n, 4)
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return ParticleSet(trans, quats, ps.weights.copy(), ps.iteration, ps.rng_seed)


Transition = Callable[[ParticleSet, int, np.random.Generator], ParticleSet]


def static_transition(ps: ParticleSet, iteration: int, rng: np.random.Generator) -> ParticleSet:
    """The object does not move between iterations."""
    return ps


class _Scorer:
    """Renders and scores particle poses; rasterization releases the GIL in the compiled backend."""

    def __init__(self, dlv, mesh, camera, backend, workers):
        self.dlv = dlv
        self.mesh = mesh
        self.camera = camera
        self.backend = backend
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def one(self, t, q) -> float:
        rot = Rotation.from_quat(q, scalar_first=True).as_matrix()
        verts = self.mesh.vertices @ rot.T + t
        depth = rasterize_points(verts, self.mesh.triangles, self.camera.focal_px,
                                 self.camera.principal_point, self.camera.resolution,
                                 backend=self.backend)
        return score_depth_image(self.dlv, depth, backend=self.backend).value

    def __call__(self, ps: ParticleSet) -> np.ndarray:
        args = list(zip(ps.translations, ps.quaternions))
        if self.pool is None:
            return np.array([self.one(t, q) for t, q in args])
        return np.array(list(self.pool.map(lambda a: self.one(*a), args)))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def localize(dlv: DepthLikelihoodVolume, mesh: TriangleMesh, camera: PlenopticCamera,
             roi: RegionOfInterest, cfg: PmclConfig = PmclConfig(),
             transition: Transition = static_transition,
             backend: str | None = None) -> LocalizationResult:
    """Iteratively weight, resample and perturb pose particles.

    Stops once the mean unnormalized weight of a batch reaches the stop
    threshold, or after ``cfg.max_iterations`` batches. The returned
    estimate is the highest-scoring pose seen in any batch.

    Raises:
        InvalidInputError: the camera resolution does not match the volume.
        TotalLikelihoodFailure: a whole batch scored zero.
    """
    if tuple(camera.resolution) != tuple(dlv.values.shape[:2]):
        raise InvalidInputError(
            f"camera resolution {camera.resolution} does not match volume {dlv.values.shape[:2]}")
    threshold = (0.9 * float(dlv.values.max()) if cfg.stop_threshold is None
                 else float(cfg.stop_threshold))
    rng = _rng(cfg)
    ps = init_particles(roi, cfg, rng)
    scorer = _Scorer(dlv, mesh, camera, backend, cfg.workers)
    best_score, best_t, best_q = -math.inf, None, None
    best_trace, mean_trace = [], []
    converged = False
    try:
        for it in range(1, cfg.max_iterations + 1):
            scores = scorer(ps)
            k = int(np.argmax(scores))
            if scores[k] > best_score:
                best_score, best_t, best_q = float(scores[k]), ps.translations[k].copy(), ps.quaternions[k].copy()
            best_trace.append(best_score)
            mean_trace.append(float(np.mean(scores)))
            ps = ParticleSet(ps.translations, ps.quaternions, scores, it, cfg.seed)
            if mean_trace[-1] >= threshold:
                converged = True
                break
            if it == cfg.max_iterations:
                break
            ps = resample(ps.normalized(), rng)
            ps = perturb(ps, cfg, rng, *cfg.sigmas_at(it))
            ps = transition(ps, it, rng)
    finally:
        scorer.close()
    logger.info("localize: %d iterations, best %.4f, mean %.4f, threshold %.4f, converged=%s",
                it, best_score, mean_trace[-1], threshold, converged)
    pose = Pose(best_t, best_q / np.linalg.norm(best_q))
    return LocalizationResult(PoseEstimate(pose, best_score), it, converged, threshold,
                              best_trace, mean_trace, cfg.seed, cfg, roi)
