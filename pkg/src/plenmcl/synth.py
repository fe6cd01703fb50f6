"""Synthetic plenoptic captures of layered translucent scenes.

Each sub-aperture view is rendered by casting rays from a pinhole shifted on
a regular grid. Surfaces along a ray are composited front to back: a layer
with transparency fraction ``alpha`` contributes ``alpha`` of the light that
reaches it and passes the remainder on. Per-pixel noise is drawn from an RNG
stream keyed on ``(seed, s, t)`` so views can be rendered in any order.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .camera import PlenopticCamera
from .errors import InvalidInputError, InvalidSceneError, SceneSpecError
from .raymodel import GaussianComponent, GaussianMixtureRay
from .rasterizer import Pose, TriangleMesh, rasterize_points

logger = logging.getLogger(__name__)

MIN_RAY_VARIANCE = 1e-8


def depth_to_disparity(camera: PlenopticCamera, d):
    """Pixel shift per unit view offset of a point at depth ``d``: ``b * f / d``."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise InvalidInputError("depth must be positive")
    with np.errstate(divide="ignore"):
        out = camera.bf / d
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- textures

def _mix64(ix, iy, iz, salt):
    """splitmix64-style 64-bit hash of an integer lattice cell."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
             ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
             ^ iz.astype(np.uint64) * np.uint64(0x165667B19E3779F9)
             ^ np.uint64(salt))
        h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return h ^ (h >> np.uint64(31))


def _hash_rgb(ix, iy, iz, salt):
    """Three uniform [0, 1) values per lattice cell from disjoint 21-bit fields of one hash."""
    h = _mix64(ix, iy, iz, salt)
    mask = np.uint64((1 << 21) - 1)
    chans = [((h >> np.uint64(21 * c)) & mask).astype(np.float64) for c in range(3)]
    return np.stack(chans, axis=1) / float(1 << 21)


@dataclass(frozen=True)
class ConstantTexture:
    color: tuple[float, float, float]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.color, dtype=np.float64), (len(points), 3)).copy()


@dataclass(frozen=True)
class CheckerTexture:
    """3-D checkerboard with cubes of edge ``size`` meters.

    Colors blend linearly across a band of width ``edge * size`` around each
    cell boundary. A hard edge quantizes sub-pixel shifts under box-filter
    supersampling, so the default keeps a soft ramp. The lattice is offset
    by half a cell so that the plane ``z = 0`` lies mid-cell.
    """

    size: float
    color_a: tuple[float, float, float] = (0.2, 0.2, 0.2)
    color_b: tuple[float, float, float] = (0.8, 0.8, 0.8)
    edge: float = 0.25

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        u = np.asarray(points, dtype=np.float64) / self.size + 0.5
        sign = 1.0 - 2.0 * (np.floor(u) % 2)
        frac = u - np.floor(u)
        dist = np.minimum(frac, 1.0 - frac)
        ramp = np.ones_like(dist) if self.edge <= 0 else np.minimum(dist / (0.5 * self.edge), 1.0)
        prod = np.prod(sign * ramp, axis=1)
        wb = 0.5 - 0.5 * prod
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        return a + wb[:, None] * (b - a)


@dataclass(frozen=True)
class NoiseTexture:
    """Smooth value noise: random colors on a cubic lattice of pitch ``cell`` meters.

    Lattice values are blended with a smoothstep-weighted trilinear
    interpolation, so the texture is continuous and band-limited to roughly
    one cycle per cell.
    """

    cell: float
    low: float = 0.1
    high: float = 0.9
    seed: int = 0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        u = np.asarray(points, dtype=np.float64) / self.cell
        base = np.floor(u)
        f = u - base
        w1 = f * f * (3.0 - 2.0 * f)
        w0 = 1.0 - w1
        idx = base.astype(np.int64)
        out = np.zeros((len(u), 3))
        for corner in range(8):
            ox, oy, oz = corner & 1, (corner >> 1) & 1, (corner >> 2) & 1
            weight = ((w1[:, 0] if ox else w0[:, 0]) * (w1[:, 1] if oy else w0[:, 1])
                      * (w1[:, 2] if oz else w0[:, 2]))
            out += weight[:, None] * _hash_rgb(idx[:, 0] + ox, idx[:, 1] + oy, idx[:, 2] + oz, self.seed)
        return self.low + (self.high - self.low) * out


Texture = ConstantTexture | CheckerTexture | NoiseTexture


# ---------------------------------------------------------------- layers

@dataclass(frozen=True)
class PlaneLayer:
    """Fronto-parallel plane ``z = depth``; texture coordinates are (x, y, 0)."""

    depth: float
    alpha: float = 1.0
    texture: Texture = ConstantTexture((0.5, 0.5, 0.5))
    sigma: float = 0.0

    def depth_extent(self):
        return self.depth, self.depth

    def intersect(self, origin, dirs, camera=None, view=None, supersample=1):
        # ray directions carry unit z, so the ray parameter equals the depth gap
        pts = origin + (self.depth - origin[2]) * dirs
        pts[:, 2] = 0.0
        return np.full(len(dirs), float(self.depth)), pts

    def describe(self):
        return {"type": "plane", "depth": self.depth}


@dataclass(frozen=True)
class SphereLayer:
    center: tuple[float, float, float]
    radius: float
    alpha: float = 1.0
    texture: Texture = ConstantTexture((0.5, 0.5, 0.5))
    sigma: float = 0.0

    def depth_extent(self):
        return self.center[2] - self.radius, self.center[2] + self.radius

    def intersect(self, origin, dirs, camera=None, view=None, supersample=1):
        c = np.asarray(self.center, dtype=np.float64)
        oc = origin - c
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * dirs @ oc
        cc = oc @ oc - self.radius ** 2
        disc = b * b - 4 * a * cc
        hit = disc >= 0
        t = np.full(len(dirs), np.inf)
        t[hit] = (-b[hit] - np.sqrt(disc[hit])) / (2 * a[hit])
        t[t <= 0] = np.inf
        pts = origin + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs - c
        depth = np.where(np.isfinite(t), origin[2] + t * dirs[:, 2], np.inf)
        return depth, pts

    def describe(self):
        return {"type": "sphere", "center": list(self.center), "radius": self.radius,
                "depth": self.center[2] - self.radius}


@dataclass(frozen=True)
class MeshLayer:
    """Textured triangle mesh placed at ``pose``; texture is a solid texture in the object frame."""

    mesh: TriangleMesh
    pose: Pose
    alpha: float = 1.0
    texture: Texture = ConstantTexture((0.5, 0.5, 0.5))
    sigma: float = 0.0

    def depth_extent(self):
        z = self.pose.transform(self.mesh.vertices)[:, 2]
        return float(z.min()), float(z.max())

    def intersect(self, origin, dirs, camera=None, view=None, supersample=1):
        k = supersample
        h, w = camera.resolution
        cx, cy = camera.principal_point
        verts = self.pose.transform(self.mesh.vertices) - origin
        depth = rasterize_points(verts, self.mesh.triangles, camera.focal_px * k,
                                 (k * cx + (k - 1) / 2, k * cy + (k - 1) / 2), (h * k, w * k))
        depth = depth.reshape(-1)
        hit = depth > 0
        pts_cam = origin + np.where(hit, depth, 0.0)[:, None] * dirs
        pts = self.pose.inverse_transform(pts_cam)
        return np.where(hit, depth, np.inf), pts

    def describe(self):
        lo, hi = self.depth_extent()
        return {"type": "mesh", "depth": lo, "depth_range": [lo, hi], "pose": self.pose.to_dict()}


Layer = PlaneLayer | SphereLayer | MeshLayer


@dataclass(frozen=True)
class SyntheticScene:
    """Layers plus an opaque background plane; the background defaults to the far depth."""

    layers: tuple[Layer, ...]
    background: PlaneLayer | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise InvalidSceneError("scene has no layers")
        for layer in self.layers:
            if not 0.0 <= layer.alpha <= 1.0:
                raise InvalidSceneError(f"layer alpha {layer.alpha} outside [0, 1]")
            if layer.sigma < 0:
                raise InvalidSceneError("layer sigma must be non-negative")
        object.__setattr__(self, "layers", tuple(self.layers))

    def all_layers(self, camera: PlenopticCamera) -> list:
        bg = self.background
        if bg is None:
            bg = PlaneLayer(camera.depth_range[1], 1.0, ConstantTexture((0.5, 0.5, 0.5)), 0.0)
        elif bg.alpha != 1.0:
            bg = PlaneLayer(bg.depth, 1.0, bg.texture, bg.sigma)
        return list(self.layers) + [bg]

    def mesh_layers(self) -> list[MeshLayer]:
        return [layer for layer in self.layers if isinstance(layer, MeshLayer)]

    def validate(self, camera: PlenopticCamera) -> None:
        lo, hi = camera.depth_range
        for i, layer in enumerate(self.all_layers(camera)):
            near, far = layer.depth_extent()
            if near < lo - 1e-12 or far > hi + 1e-12:
                raise InvalidSceneError(
                    f"layer {i} spans depths [{near:.4g}, {far:.4g}] outside camera range [{lo}, {hi}]")


@dataclass
class SubApertureStack:
    """Rendered views: ``images[s-1, t-1]`` is the (H, W, 3) frame of view (s, t)."""

    camera: PlenopticCamera
    images: np.ndarray
    valid_mask: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        s, t = self.camera.grid
        h, w = self.camera.resolution
        if self.images.shape != (s, t, h, w, 3):
            raise InvalidInputError(f"images shape {self.images.shape} != {(s, t, h, w, 3)}")
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.valid_mask.shape != (s, t):
            raise InvalidInputError("valid mask shape does not match the view grid")
        sc, tc = self.camera.center
        if not self.valid_mask[sc - 1, tc - 1]:
            raise InvalidInputError("center view must be valid")

    def view(self, s: int, t: int) -> np.ndarray:
        return self.images[s - 1, t - 1]

    @property
    def center_view(self) -> np.ndarray:
        return self.view(*self.camera.center)


# ---------------------------------------------------------------- rendering

def _layer_weights(depths, alphas):
    """Front-to-back compositing weights ``w_i = alpha_i prod_{j in front} (1 - alpha_j)``.

    ``depths`` is (layers, N) with ``inf`` for a miss; returns (layers, N).
    """
    n_layers, n = depths.shape
    order = np.argsort(depths, axis=0, kind="stable")
    weights = np.zeros((n_layers, n))
    trans = np.ones(n)
    cols = np.arange(n)
    for slot in range(n_layers):
        li = order[slot]
        a = np.where(np.isfinite(depths[li, cols]), alphas[li], 0.0)
        weights[li, cols] = trans * a
        trans = trans * (1.0 - a)
    return weights


def render_view(scene: SyntheticScene, camera: PlenopticCamera, s: int, t: int,
                supersample: int = 4, rays: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free mean image and per-pixel noise variance of one view."""
    k = supersample
    h, w = camera.resolution
    if rays is None:
        rays = camera.pixel_rays(k)
    dirs = rays.reshape(-1, 3)
    origin = camera.view_origin(s, t)
    layers = scene.all_layers(camera)
    depths = np.empty((len(layers), len(dirs)))
    points = []
    for i, layer in enumerate(layers):
        depths[i], pts = layer.intersect(origin, dirs, camera=camera, view=(s, t), supersample=k)
        points.append(pts)
    alphas = np.array([layer.alpha for layer in layers])
    sigmas = np.array([layer.sigma for layer in layers])
    weights = _layer_weights(depths, alphas)
    color = np.zeros((len(dirs), 3))
    var = np.zeros(len(dirs))
    for i, layer in enumerate(layers):
        seen = weights[i] > 0
        if seen.any():
            color[seen] += weights[i, seen, None] * layer.texture.evaluate(points[i][seen])
        var += (weights[i] * sigmas[i]) ** 2
    color = color.reshape(h, k, w, k, 3).mean(axis=(1, 3))
    var = var.reshape(h, k, w, k).mean(axis=(1, 3))
    return color, var


def render_stack(scene: SyntheticScene, camera: PlenopticCamera, supersample: int = 4,
                 mask_edge_views: bool = True) -> SubApertureStack:
    """Render every sub-aperture view of ``scene``.

    Pixels are box-filtered over a ``supersample`` x ``supersample`` grid so
    sub-pixel disparities survive sampling. Noise is added after filtering
    with the composited variance ``sum_i w_i^2 sigma_i^2``.

    Raises:
        InvalidSceneError: a layer lies outside ``camera.depth_range``.
    """
    scene.validate(camera)
    s_n, t_n = camera.grid
    h, w = camera.resolution
    images = np.empty((s_n, t_n, h, w, 3))
    rays = camera.pixel_rays(supersample)
    for s, t in camera.views():
        mean, var = render_view(scene, camera, s, t, supersample, rays=rays)
        if np.any(var > 0):
            rng = np.random.default_rng([scene.seed, s, t])
            mean = mean + rng.standard_normal(mean.shape) * np.sqrt(var)[..., None]
        images[s - 1, t - 1] = np.clip(mean, 0.0, 1.0)
    mask = ~camera.edge_mask() if mask_edge_views else np.ones(camera.grid, dtype=bool)
    return SubApertureStack(camera, images, mask, seed=scene.seed)


def ground_truth_ray(scene: SyntheticScene, camera: PlenopticCamera, pixel: tuple[int, int],
                     min_variance: float = MIN_RAY_VARIANCE):
    """Exact mixture seen by center-view pixel ``(i, j)`` and the depth of each component.

    Layers with zero noise get ``min_variance`` so the mixture stays proper.
    All contributing layers must share one noise level.
    """
    i, j = pixel
    h, w = camera.resolution
    if not (0 <= i < h and 0 <= j < w):
        raise InvalidInputError(f"pixel {pixel} outside the {h}x{w} center view")
    cx, cy = camera.principal_point
    ray = np.array([[(j - cx) / camera.focal_px, (i - cy) / camera.focal_px, 1.0]])
    origin = np.zeros(3)
    hits = []
    for layer in scene.all_layers(camera):
        if isinstance(layer, MeshLayer):
            d = _mesh_ray_depth(layer, ray[0])
            pts = layer.pose.inverse_transform(ray * d) if np.isfinite(d) else None
        else:
            dd, pts = layer.intersect(origin, ray)
            d = dd[0]
        if np.isfinite(d):
            hits.append((d, layer, layer.texture.evaluate(pts)[0]))
    hits.sort(key=lambda x: x[0])
    comps, depths = [], []
    trans = 1.0
    for d, layer, color in hits:
        wgt = trans * layer.alpha
        trans *= 1.0 - layer.alpha
        if wgt > 0:
            var = np.full(3, max(layer.sigma ** 2, min_variance))
            comps.append(GaussianComponent(wgt, color, var))
            depths.append(float(d))
        if trans == 0.0:
            break
    return GaussianMixtureRay(tuple(comps)), depths


def _mesh_ray_depth(layer: MeshLayer, direction: np.ndarray) -> float:
    """Nearest camera-space z where ``direction * z`` meets the mesh (Moller-Trumbore)."""
    verts = layer.pose.transform(layer.mesh.vertices)
    tri = verts[layer.mesh.triangles]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    p = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-15
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = -tri[:, 0]
    u = np.einsum("ij,ij->i", tvec, p) * inv
    q = np.cross(tvec, e1)
    v = (q @ direction) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    good = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
    return float(t[good].min()) if good.any() else np.inf


def translucent_pair_scene(front_alpha: float = 0.3, front_depth: float = 0.5,
                           back_depth: float = 0.7, sigma: float = 0.0, seed: int = 0,
                           front_cell: float = 0.004, back_cell: float = 0.004) -> SyntheticScene:
    """Glass-over-ball replica: a translucent textured plane over an opaque textured plane."""
    front = PlaneLayer(front_depth, front_alpha, NoiseTexture(front_cell, seed=seed + 101), sigma)
    back = PlaneLayer(back_depth, 1.0, NoiseTexture(back_cell, seed=seed + 202), sigma)
    return SyntheticScene((front, back), seed=seed)


# ---------------------------------------------------------------- scene JSON

def _texture_from_spec(spec, where):
    if not isinstance(spec, dict):
        raise SceneSpecError("texture must be an object", field=where)
    kind = spec.get("type")
    try:
        if kind == "constant":
            return ConstantTexture(tuple(float(c) for c in spec["color"]))
        if kind == "checker":
            return CheckerTexture(float(spec["size"]),
                                  tuple(spec.get("color_a", (0.2, 0.2, 0.2))),
                                  tuple(spec.get("color_b", (0.8, 0.8, 0.8))),
                                  float(spec.get("edge", 0.25)))
        if kind == "noise":
            return NoiseTexture(float(spec["cell"]), float(spec.get("low", 0.1)),
                                float(spec.get("high", 0.9)), int(spec.get("seed", 0)))
    except KeyError as exc:
        raise SceneSpecError(f"missing key {exc.args[0]!r}", field=where) from exc
    except (TypeError, ValueError) as exc:
        raise SceneSpecError(str(exc), field=where) from exc
    raise SceneSpecError(f"unknown texture type {kind!r}", field=f"{where}.type")


def _mesh_from_spec(spec, where, base_dir):
    if "obj" in spec:
        path = Path(spec["obj"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return TriangleMesh.load_obj(path, symmetry_axis=spec.get("symmetry_axis"))
    prim = spec.get("primitive")
    if prim == "cylinder":
        return TriangleMesh.cylinder(float(spec["radius"]), float(spec["height"]),
                                     int(spec.get("segments", 32)))
    if prim == "sphere":
        return TriangleMesh.uv_sphere(float(spec["radius"]), int(spec.get("segments", 64)),
                                      int(spec.get("segments", 64)) // 2)
    raise SceneSpecError("mesh layer needs 'obj' or a known 'primitive'", field=where)


def _layer_from_spec(spec, where, base_dir):
    if not isinstance(spec, dict):
        raise SceneSpecError("layer must be an object", field=where)
    kind = spec.get("type")
    tex = _texture_from_spec(spec.get("texture", {"type": "constant", "color": [0.5] * 3}),
                             f"{where}.texture")
    try:
        alpha = float(spec.get("alpha", 1.0))
        sigma = float(spec.get("sigma", 0.0))
        if kind == "plane":
            return PlaneLayer(float(spec["depth"]), alpha, tex, sigma)
        if kind == "sphere":
            return SphereLayer(tuple(float(c) for c in spec["center"]), float(spec["radius"]),
                               alpha, tex, sigma)
        if kind == "mesh":
            mesh = _mesh_from_spec(spec, where, base_dir)
            pose = Pose.from_dict(spec["pose"])
            return MeshLayer(mesh, pose, alpha, tex, sigma)
    except KeyError as exc:
        raise SceneSpecError(f"missing key {exc.args[0]!r}", field=where) from exc
    except (TypeError, ValueError) as exc:
        raise SceneSpecError(str(exc), field=where) from exc
    raise SceneSpecError(f"unknown layer type {kind!r}", field=f"{where}.type")


def scene_from_dict(spec: dict, base_dir=None) -> SyntheticScene:
    """Parse a scene document (see ``load_scene``)."""
    if not isinstance(spec, dict):
        raise SceneSpecError("scene must be a JSON object")
    layers = spec.get("layers")
    if not isinstance(layers, list) or not layers:
        raise SceneSpecError("scene needs a non-empty 'layers' list", field="layers")
    parsed = tuple(_layer_from_spec(l, f"layers[{i}]", base_dir) for i, l in enumerate(layers))
    bg = None
    if spec.get("background") is not None:
        bg = _layer_from_spec(dict(spec["background"], type="plane"), "background", base_dir)
    try:
        seed = int(spec.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise SceneSpecError(str(exc), field="seed") from exc
    try:
        return SyntheticScene(parsed, bg, seed)
    except InvalidSceneError as exc:
        raise SceneSpecError(str(exc), field="layers") from exc


def load_scene(path) -> tuple[SyntheticScene, dict]:
    """Read a scene JSON file; returns the scene and the raw document.

    Document layout::

        {"camera": {...PlenopticCamera fields...},      # optional
         "layers": [{"type": "plane", "depth": 0.5, "alpha": 0.3,
                     "texture": {"type": "noise", "cell": 0.004}, "sigma": 0.01}, ...],
         "background": {"depth": 1.5, "texture": {...}},  # optional
         "seed": 0}
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneSpecError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return scene_from_dict(doc, base_dir=Path(path).parent), doc


def truth_record(scene: SyntheticScene, camera: PlenopticCamera) -> dict:
    """Ground-truth sidecar: per-layer depths and alphas, plus the first mesh pose."""
    rec = {"seed": scene.seed, "layers": []}
    for layer in scene.all_layers(camera):
        entry = layer.describe()
        entry["alpha"] = layer.alpha
        entry["sigma"] = layer.sigma
        rec["layers"].append(entry)
    meshes = scene.mesh_layers()
    if meshes:
        rec["object_pose"] = meshes[0].pose.to_dict()
    return rec


# ---------------------------------------------------------------- stack I/O

def save_stack(stack: SubApertureStack, out_dir, bit_depth: int = 16, extra_meta: dict | None = None):
    """Write ``meta.json`` and one PNG per view named ``view_{s}_{t}.png`` (1-based)."""
    if bit_depth not in (8, 16):
        raise InvalidInputError("bit depth must be 8 or 16")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scale = 255.0 if bit_depth == 8 else 65535.0
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    for s, t in stack.camera.views():
        img = np.rint(np.clip(stack.view(s, t), 0, 1) * scale).astype(dtype)
        if not cv2.imwrite(str(out / f"view_{s}_{t}.png"), img[..., ::-1]):
            raise OSError(f"failed to write view ({s}, {t})")
    cam = stack.camera.to_dict()
    meta = {**cam, "valid_mask": stack.valid_mask.astype(int).tolist(), "seed": stack.seed,
            "bit_depth": bit_depth}
    if extra_meta:
        meta.update(extra_meta)
    (out / "meta.json").write_text(json.dumps(meta, indent=2))


def load_stack(stack_dir) -> SubApertureStack:
    """Read a stack directory written by ``save_stack``."""
    root = Path(stack_dir)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise InvalidInputError(f"{stack_dir} has no meta.json")
    meta = json.loads(meta_path.read_text())
    camera = PlenopticCamera.from_dict(meta)
    mask = np.asarray(meta.get("valid_mask", np.ones(camera.grid, dtype=int)), dtype=bool)
    s_n, t_n = camera.grid
    h, w = camera.resolution
    images = np.zeros((s_n, t_n, h, w, 3))
    for s, t in camera.views():
        if not mask[s - 1, t - 1]:
            path = root / f"view_{s}_{t}.png"
            if not path.exists():
                continue
        path = root / f"view_{s}_{t}.png"
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise InvalidInputError(f"missing or unreadable view {path.name}")
        if img.shape[:2] != (h, w):
            raise InvalidInputError(f"{path.name} has shape {img.shape[:2]}, expected {(h, w)}")
        scale = 255.0 if img.dtype == np.uint8 else 65535.0
        images[s - 1, t - 1] = img[..., ::-1].astype(np.float64) / scale
    return SubApertureStack(camera, images, mask, seed=meta.get("seed"))
