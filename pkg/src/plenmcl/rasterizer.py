"""Z-buffer depth rendering of triangle meshes at hypothesized poses."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy.spatial.transform import Rotation

from . import _kernels
from .camera import PlenopticCamera
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

QUAT_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Object-to-camera rigid transform; ``quaternion`` is scalar-first (w, x, y, z)."""

    translation: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > QUAT_TOL:
            raise InvalidInputError(f"quaternion norm {np.linalg.norm(q)} is not 1")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q)

    @classmethod
    def from_rotation(cls, translation, rotation: Rotation) -> "Pose":
        q = rotation.as_quat(scalar_first=True)
        return cls(translation, q / np.linalg.norm(q))

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.quaternion, scalar_first=True)

    def rotation_matrix(self) -> np.ndarray:
        return self.rotation.as_matrix()

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) object-frame points into the camera frame."""
        return np.asarray(points, dtype=np.float64) @ self.rotation_matrix().T + self.translation

    def inverse_transform(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation_matrix()

    def to_dict(self) -> dict:
        return {"translation": self.translation.tolist(), "quaternion": self.quaternion.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        q = np.asarray(d.get("quaternion", [1.0, 0.0, 0.0, 0.0]), dtype=np.float64)
        return cls(d["translation"], q / np.linalg.norm(q))


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle soup in the object frame (meters)."""

    vertices: np.ndarray
    triangles: np.ndarray
    symmetry_axis: str | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidInputError("vertices must have shape (N, 3)")
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise InvalidInputError("triangles must have shape (M, 3), M > 0")
        if f.min() < 0 or f.max() >= len(v):
            raise InvalidInputError("triangle index out of range")
        e1 = v[f[:, 1]] - v[f[:, 0]]
        e2 = v[f[:, 2]] - v[f[:, 0]]
        area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        if np.any(area <= 0):
            raise InvalidInputError(f"{int(np.sum(area <= 0))} degenerate triangle(s)")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)

    @classmethod
    def cylinder(cls, radius: float, height: float, segments: int = 32) -> "TriangleMesh":
        """Closed cylinder centered at the origin with its axis along object z."""
        ang = 2.0 * np.pi * np.arange(segments) / segments
        ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
        bottom = np.column_stack([ring, np.full(segments, -height / 2)])
        top = np.column_stack([ring, np.full(segments, height / 2)])
        verts = np.vstack([bottom, top, [[0, 0, -height / 2], [0, 0, height / 2]]])
        cb, ct = 2 * segments, 2 * segments + 1
        tris = []
        for i in range(segments):
            j = (i + 1) % segments
            tris += [[i, j, segments + j], [i, segments + j, segments + i]]
            tris += [[cb, j, i], [ct, segments + i, segments + j]]
        return cls(verts, np.array(tris), symmetry_axis="z")

    @classmethod
    def uv_sphere(cls, radius: float, n_lon: int = 64, n_lat: int = 32) -> "TriangleMesh":
        theta = np.pi * np.arange(1, n_lat) / n_lat
        phi = 2.0 * np.pi * np.arange(n_lon) / n_lon
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        ring = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
        verts = np.vstack([[[0, 0, 1]], ring.reshape(-1, 3), [[0, 0, -1]]]) * radius
        south = len(verts) - 1

        def idx(r, c):
            return 1 + r * n_lon + (c % n_lon)

        tris = []
        for c in range(n_lon):
            tris.append([0, idx(0, c), idx(0, c + 1)])
            tris.append([south, idx(n_lat - 2, c + 1), idx(n_lat - 2, c)])
        for r in range(n_lat - 2):
            for c in range(n_lon):
                tris.append([idx(r, c), idx(r + 1, c), idx(r + 1, c + 1)])
                tris.append([idx(r, c), idx(r + 1, c + 1), idx(r, c + 1)])
        return cls(verts, np.array(tris), symmetry_axis="z")

    @classmethod
    def load_obj(cls, path, symmetry_axis: str | None = None) -> "TriangleMesh":
        """Read ``v`` and ``f`` records of an ASCII OBJ; polygons are fan-triangulated."""
        verts, tris = [], []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    if parts[0] == "v":
                        verts.append([float(x) for x in parts[1:4]])
                    elif parts[0] == "f":
                        idx = []
                        for tok in parts[1:]:
                            i = int(tok.split("/")[0])
                            idx.append(i - 1 if i > 0 else len(verts) + i)
                        for k in range(1, len(idx) - 1):
                            tris.append([idx[0], idx[k], idx[k + 1]])
                except ValueError as exc:
                    raise InvalidInputError(f"{path}:{lineno}: cannot parse {line.strip()!r}") from exc
        return cls(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(tris).reshape(-1, 3),
                   symmetry_axis=symmetry_axis)

    def save_obj(self, path) -> None:
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for f in self.triangles:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


@dataclass
class DepthImage:
    """Camera-space z per pixel in meters; 0 marks pixels with no surface."""

    depth: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if np.any(self.depth < 0) or not np.all(np.isfinite(self.depth)):
            raise InvalidInputError("depth values must be finite and non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0

    def save_png16(self, path) -> None:
        """Write millimeter-quantized depth as a 16-bit PNG (0 = invalid)."""
        mm = np.clip(np.rint(self.depth * 1000.0), 0, 65535).astype(np.uint16)
        if not cv2.imwrite(str(path), mm):
            raise OSError(f"failed to write {path}")

    @classmethod
    def load_png16(cls, path) -> "DepthImage":
        mm = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if mm is None:
            raise OSError(f"failed to read {path}")
        return cls(mm.astype(np.float64) / 1000.0)


def rasterize_points(vertices_cam, triangles, focal_px, principal_point, resolution,
                     backend=None) -> np.ndarray:
    """Rasterize camera-frame vertices with an explicit pinhole; returns raw depth array."""
    k = _kernels.resolve(backend)
    h, w = resolution
    return k.rasterize(np.ascontiguousarray(vertices_cam, dtype=np.float64),
                       np.ascontiguousarray(triangles, dtype=np.int64),
                       float(focal_px), float(focal_px),
                       float(principal_point[0]), float(principal_point[1]), int(h), int(w))


def rasterize_depth(mesh: TriangleMesh, pose: Pose, camera: PlenopticCamera,
                    backend: str | None = None) -> DepthImage:
    """Render ``mesh`` at ``pose`` through the center-view pinhole.

    Pixel ``(i, j)`` samples the ray through its center ``(u, v) = (j, i)``;
    edges follow a top-left fill rule and depth is interpolated as 1/z, so it
    is exact for each planar facet. Triangles reaching closer than 1 mm to
    the camera plane are dropped rather than clipped.
    """
    verts = pose.transform(mesh.vertices)
    depth = rasterize_points(verts, mesh.triangles, camera.focal_px, camera.principal_point,
                             camera.resolution, backend=backend)
    return DepthImage(depth)
