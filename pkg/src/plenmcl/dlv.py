"""Depth likelihood volumes from sub-aperture stacks.

Pipeline: a sub-pixel-shift cost volume mixing truncated color and gradient
differences between the center view and every other usable view, converted
per pixel to log-normalized likelihoods, optionally truncated to a few
local-maximum peaks. Volumes are queried by linear interpolation in depth.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DepthOutOfRangeError, InvalidInputError, NoStereoEvidenceError
from .synth import SubApertureStack

logger = logging.getLogger(__name__)

MAX_SHIFT_PX = 4.0
DLV_MAGIC = b"DLV1"


@dataclass(frozen=True)
class DepthLabels:
    """Increasing depth labels in meters; ``bf`` gives their disparities when known."""

    values: np.ndarray
    bf: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(v) < 2:
            raise InvalidInputError("need at least two depth labels")
        if np.any(np.diff(v) <= 0) or v[0] <= 0:
            raise InvalidInputError("depth labels must be positive and strictly increasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform_disparity(cls, d_min: float, d_max: float, count: int, bf: float) -> "DepthLabels":
        """``count`` labels evenly spaced in disparity between ``d_min`` and ``d_max``."""
        if count < 2:
            raise InvalidInputError("need at least two depth labels")
        if not 0 < d_min < d_max:
            raise InvalidInputError("need 0 < d_min < d_max")
        disp = np.linspace(bf / d_min, bf / d_max, count)
        depths = bf / disp
        depths[0], depths[-1] = d_min, d_max
        return cls(depths, bf)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def disparities(self) -> np.ndarray:
        if self.bf is None:
            raise InvalidInputError("labels carry no b*f product")
        return self.bf / self.values

    def nearest(self, depth: float) -> int:
        """Index of the label closest in disparity (depth when ``bf`` is unknown)."""
        if self.bf is None:
            return int(np.argmin(np.abs(self.values - depth)))
        return int(np.argmin(np.abs(self.disparities - self.bf / depth)))


@dataclass(frozen=True)
class CostVolumeParams:
    beta: float = 0.5
    tau1: float = 0.5
    tau2: float = 0.5
    window: int = 1
    use_edge_views: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidInputError("beta must lie in [0, 1]")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise InvalidInputError("truncation values must be positive")
        if self.window < 0:
            raise InvalidInputError("window half-width must be >= 0")


@dataclass
class CostVolume:
    values: np.ndarray
    labels: DepthLabels

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass
class DepthLikelihoodVolume:
    """Likelihood ``values[i, j, l]`` that pixel (i, j) sees a surface at ``labels.values[l]``.

    ``coverage`` is False for pixels without depth evidence (all-zero cost).
    """

    values: np.ndarray
    labels: DepthLabels
    coverage: np.ndarray
    truncation: tuple[int, int] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=bool)
        h, w, n = self.values.shape
        if n != self.labels.count:
            raise InvalidInputError("label count does not match volume depth")
        if self.coverage.shape != (h, w):
            raise InvalidInputError("coverage mask shape does not match volume")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def argmax_depth(self) -> np.ndarray:
        """Depth of the most likely label per pixel; 0 where coverage is missing."""
        out = self.labels.values[np.argmax(self.values, axis=-1)]
        return np.where(self.coverage, out, 0.0)

    def scaled(self, factor: float) -> "DepthLikelihoodVolume":
        return DepthLikelihoodVolume(self.values * factor, self.labels, self.coverage, self.truncation)


# ---------------------------------------------------------------- cost volume

def subpixel_shift(image: np.ndarray, offset: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly resample ``image`` at ``x + offset``; ``offset = (dx, dy)`` in pixels.

    Returns the resampled image and a mask that is False where the sample
    position falls outside the frame.
    """
    dx, dy = offset
    if abs(dx) > MAX_SHIFT_PX or abs(dy) > MAX_SHIFT_PX:
        raise InvalidInputError(f"shift {offset} exceeds the {MAX_SHIFT_PX}px sub-pixel regime")
    image = np.asarray(image, dtype=np.float64)
    return _kernels.kernels.bilinear_shift(image, float(dx), float(dy))


def view_features(image: np.ndarray) -> np.ndarray:
    """Stack rgb, x-gradients and y-gradients into an (H, W, 9) array."""
    gy, gx = np.gradient(image, axis=(0, 1))
    return np.concatenate([image, gx, gy], axis=-1)


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a (2r+1)^2 window on the first two axes; out-of-frame terms are 0."""
    if radius == 0:
        return a.copy()
    h, w = a.shape[:2]
    pad = np.zeros((h + 2 * radius, w + 2 * radius) + a.shape[2:])
    pad[radius:radius + h, radius:radius + w] = a
    out = np.zeros_like(a)
    for di in range(2 * radius + 1):
        for dj in range(2 * radius + 1):
            out += pad[di:di + h, dj:dj + w]
    return out


def stereo_views(stack: SubApertureStack, params: CostVolumeParams) -> list[tuple[int, int]]:
    """Views compared against the center.

    Interior views are used when their mask entry is set. The outermost ring
    is skipped unless ``params.use_edge_views`` is set, in which case it is
    used even where the default edge mask marks it as disregarded.
    """
    cam = stack.camera
    out = []
    for s, t in cam.views():
        if (s, t) == cam.center:
            continue
        if cam.is_edge_view(s, t):
            if params.use_edge_views:
                out.append((s, t))
        elif stack.valid_mask[s - 1, t - 1]:
            out.append((s, t))
    return out


def compute_cost_volume(stack: SubApertureStack, labels: DepthLabels,
                        params: CostVolumeParams = CostVolumeParams(),
                        backend: str | None = None) -> CostVolume:
    """Matching cost for every center-view pixel and depth label.

    For view ``(s, t)`` and label disparity ``D`` the view is sampled at
    ``x + (s - s_c, t - t_c) * D``. Per channel, absolute color differences
    are truncated at ``tau1`` and gradient differences at ``tau2``; the
    gradient term weights x by ``gamma = |s - s_c| / (|s - s_c| + |t - t_c|)``
    and y by ``1 - gamma``. Terms are blended with ``beta`` and summed over
    views and the ``(2 window + 1)^2`` neighborhood.

    Samples falling outside a view are dropped; where that happens the
    remaining terms are rescaled to the full term count so border pixels stay
    comparable across labels.

    Raises:
        NoStereoEvidenceError: no usable view besides the center.
    """
    cam = stack.camera
    if labels.bf is None:
        labels = DepthLabels(labels.values, cam.bf)
    views = stereo_views(stack, params)
    if not views:
        raise NoStereoEvidenceError("no valid views besides the center view")
    offsets = np.array([cam.view_offset(s, t) for s, t in views], dtype=np.float64)
    disp = labels.disparities
    max_shift = np.abs(offsets).max() * disp.max()
    if max_shift > MAX_SHIFT_PX + 1e-12:
        raise InvalidInputError(
            f"largest view shift {max_shift:.3f}px exceeds {MAX_SHIFT_PX}px; narrow the label range")
    gammas = np.abs(offsets[:, 0]) / np.abs(offsets).sum(axis=1)
    center = view_features(stack.center_view)
    feats = np.stack([view_features(stack.view(s, t)) for s, t in views])
    k = _kernels.resolve(backend)
    num, cnt = k.label_costs(center, feats, offsets, gammas, disp,
                             float(params.beta), float(params.tau1), float(params.tau2))
    num_w = _box_sum(num, params.window)
    cnt_w = _box_sum(cnt, params.window)
    full = float(len(views) * (2 * params.window + 1) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        cost = np.where(cnt_w == full, num_w, num_w / cnt_w * full)
    empty = cnt_w == 0
    if empty.any():
        # no in-frame sample at this label: treat as the worst label of the pixel
        worst = np.max(np.where(empty, -np.inf, cost), axis=-1, keepdims=True)
        worst = np.where(np.isfinite(worst), worst, 0.0)
        cost = np.where(empty, np.broadcast_to(worst, cost.shape), cost)
    return CostVolume(cost, labels)


def cost_to_likelihood(cv: CostVolume) -> DepthLikelihoodVolume:
    """Per pixel ``L_i = ln((C_max - C_i) / sum_l C_l + 1)``.

    Pixels whose costs sum to zero carry no evidence: they get ``L = 0``
    everywhere and are cleared in the coverage mask.
    """
    c = np.asarray(cv.values, dtype=np.float64)
    cmax = c.max(axis=-1, keepdims=True)
    total = c.sum(axis=-1, keepdims=True)
    coverage = total[..., 0] > 0
    ratio = np.divide(cmax - c, total, out=np.zeros_like(c), where=total > 0)
    return DepthLikelihoodVolume(np.log1p(ratio), cv.labels, coverage)


def truncate_local_maxima(dlv: DepthLikelihoodVolume, n_lm: int, k_lm: int,
                          backend: str | None = None) -> DepthLikelihoodVolume:
    """Keep each pixel's ``n_lm`` strongest peaks with ``k_lm`` neighbors per side; zero the rest.

    A peak is strictly greater than both label neighbors (the first and last
    label need only beat their single neighbor). Equal peaks are ranked by
    smaller label index.
    """
    if n_lm < 1 or k_lm < 0:
        raise InvalidInputError("need n_lm >= 1 and k_lm >= 0")
    h, w, n = dlv.values.shape
    k = _kernels.resolve(backend)
    out = k.truncate_profiles(dlv.values.reshape(-1, n), int(n_lm), int(k_lm))
    return DepthLikelihoodVolume(out.reshape(h, w, n), dlv.labels, dlv.coverage.copy(), (n_lm, k_lm))


def build_dlv(stack: SubApertureStack, labels: DepthLabels,
              params: CostVolumeParams = CostVolumeParams(), n_lm: int | None = None,
              k_lm: int = 2, backend: str | None = None) -> DepthLikelihoodVolume:
    """Cost volume, likelihood conversion and optional truncation in one call."""
    dlv = cost_to_likelihood(compute_cost_volume(stack, labels, params, backend=backend))
    if n_lm is not None:
        dlv = truncate_local_maxima(dlv, n_lm, k_lm, backend=backend)
    return dlv


def default_labels(camera, count: int = 75) -> DepthLabels:
    return DepthLabels.uniform_disparity(camera.depth_range[0], camera.depth_range[1], count,
                                         camera.bf)


# ---------------------------------------------------------------- queries

def query_likelihood(dlv: DepthLikelihoodVolume, pixel: tuple[int, int], depth: float) -> float:
    """Likelihood at an arbitrary depth, linear between the bracketing labels.

    Raises:
        DepthOutOfRangeError: ``depth`` lies outside the label range.
    """
    i, j = pixel
    h, w, _ = dlv.values.shape
    if not (0 <= i < h and 0 <= j < w):
        raise InvalidInputError(f"pixel {pixel} out of bounds")
    lab = dlv.labels.values
    if not lab[0] <= depth <= lab[-1]:
        raise DepthOutOfRangeError(f"depth {depth} outside [{lab[0]}, {lab[-1]}]")
    n = int(np.clip(np.searchsorted(lab, depth, side="right") - 1, 0, len(lab) - 2))
    t = (depth - lab[n]) / (lab[n + 1] - lab[n])
    return float((1.0 - t) * dlv.values[i, j, n] + t * dlv.values[i, j, n + 1])


# ---------------------------------------------------------------- file format

def write_dlv(path, dlv: DepthLikelihoodVolume) -> None:
    """Binary layout: ``DLV1``, u32 H, W, L, L x f64 labels, H*W*L f32 values, H*W u8 coverage."""
    h, w, n = dlv.values.shape
    with open(path, "wb") as fh:
        fh.write(DLV_MAGIC)
        fh.write(struct.pack("<III", h, w, n))
        fh.write(dlv.labels.values.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(dlv.values, dtype="<f4").tobytes())
        fh.write(dlv.coverage.astype(np.uint8).tobytes())


def read_dlv(path, bf: float | None = None) -> DepthLikelihoodVolume:
    data = Path(path).read_bytes()
    if data[:4] != DLV_MAGIC:
        raise InvalidInputError(f"{path} is not a DLV1 file")
    h, w, n = struct.unpack_from("<III", data, 4)
    off = 16
    labels = np.frombuffer(data, dtype="<f8", count=n, offset=off)
    off += 8 * n
    values = np.frombuffer(data, dtype="<f4", count=h * w * n, offset=off).reshape(h, w, n)
    off += 4 * h * w * n
    coverage = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=off).reshape(h, w)
    if off + h * w != len(data):
        raise InvalidInputError(f"{path} has {len(data) - off - h * w} trailing bytes")
    return DepthLikelihoodVolume(values.astype(np.float64), DepthLabels(labels.copy(), bf),
                                 coverage.astype(bool))
