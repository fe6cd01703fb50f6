"""Plenoptic camera model: a regular grid of pinhole sub-aperture views."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import InvalidInputError

# b*f in meter-pixels: the [0.3 m, 1.5 m] range maps to at most 0.8 px
# between adjacent views.
DEFAULT_BF = 0.24
DEFAULT_RESOLUTION = (328, 328)
DEFAULT_FOCAL_PX = 328.0


@dataclass(frozen=True)
class PlenopticCamera:
    """Sub-aperture grid geometry.

    View ``(s, t)`` (1-based) is an ideal pinhole translated in the image
    plane so that a point at depth ``d`` seen at pixel ``x`` in the center
    view appears at ``x + (s - s_c, t - t_c) * b * f / d`` in that view.
    ``s`` runs along image columns and ``t`` along rows.
    """

    grid: tuple[int, int] = (9, 9)
    center: tuple[int, int] | None = None
    baseline: float = DEFAULT_BF / DEFAULT_FOCAL_PX
    focal_px: float = DEFAULT_FOCAL_PX
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    principal_point: tuple[float, float] | None = None
    depth_range: tuple[float, float] = (0.3, 1.5)

    def __post_init__(self):
        s, t = (int(v) for v in self.grid)
        if s < 3 or t < 3 or s % 2 == 0 or t % 2 == 0:
            raise InvalidInputError(f"grid {self.grid} must have odd sizes >= 3")
        middle = ((s + 1) // 2, (t + 1) // 2)
        center = middle if self.center is None else tuple(int(v) for v in self.center)
        if center != middle:
            raise InvalidInputError(f"center {center} is not the middle view {middle}")
        if self.baseline <= 0 or self.focal_px <= 0:
            raise InvalidInputError("baseline and focal length must be positive")
        h, w = (int(v) for v in self.resolution)
        if h < 1 or w < 1:
            raise InvalidInputError("resolution must be positive")
        pp = ((w - 1) / 2.0, (h - 1) / 2.0) if self.principal_point is None else self.principal_point
        lo, hi = (float(v) for v in self.depth_range)
        if not 0 < lo < hi:
            raise InvalidInputError(f"invalid depth range {self.depth_range}")
        object.__setattr__(self, "grid", (s, t))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "resolution", (h, w))
        object.__setattr__(self, "principal_point", (float(pp[0]), float(pp[1])))
        object.__setattr__(self, "depth_range", (lo, hi))

    @classmethod
    def with_bf(cls, bf: float, focal_px: float, **kwargs) -> "PlenopticCamera":
        """Construct from the baseline-focal product instead of the baseline."""
        return cls(baseline=bf / focal_px, focal_px=focal_px, **kwargs)

    @property
    def bf(self) -> float:
        return self.baseline * self.focal_px

    @property
    def height(self) -> int:
        return self.resolution[0]

    @property
    def width(self) -> int:
        return self.resolution[1]

    def views(self) -> Iterator[tuple[int, int]]:
        """All 1-based view indices, row-major in ``s`` then ``t``."""
        for s in range(1, self.grid[0] + 1):
            for t in range(1, self.grid[1] + 1):
                yield s, t

    def view_offset(self, s: int, t: int) -> tuple[int, int]:
        return s - self.center[0], t - self.center[1]

    def view_origin(self, s: int, t: int) -> np.ndarray:
        """Optical center of view ``(s, t)`` in center-camera coordinates."""
        ds, dt = self.view_offset(s, t)
        return np.array([-ds * self.baseline, -dt * self.baseline, 0.0])

    def is_edge_view(self, s: int, t: int) -> bool:
        return s in (1, self.grid[0]) or t in (1, self.grid[1])

    def edge_mask(self) -> np.ndarray:
        """(S, T) boolean mask, True on the outermost ring of views."""
        mask = np.zeros(self.grid, dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        return mask

    def pixel_rays(self, supersample: int = 1) -> np.ndarray:
        """(H*k, W*k, 3) ray directions with unit z through a k x k sub-pixel grid."""
        k = int(supersample)
        h, w = self.resolution
        cx, cy = self.principal_point
        sub = (np.arange(k) + 0.5) / k - 0.5
        u = (np.arange(w)[:, None] + sub[None, :]).reshape(-1)
        v = (np.arange(h)[:, None] + sub[None, :]).reshape(-1)
        uu, vv = np.meshgrid((u - cx) / self.focal_px, (v - cy) / self.focal_px)
        return np.stack([uu, vv, np.ones_like(uu)], axis=-1)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project (N, 3) center-camera points to (N, 2) pixel coordinates (u, v)."""
        points = np.asarray(points, dtype=np.float64)
        cx, cy = self.principal_point
        z = points[:, 2]
        return np.stack([self.focal_px * points[:, 0] / z + cx,
                         self.focal_px * points[:, 1] / z + cy], axis=-1)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "PlenopticCamera":
        known = {"grid", "center", "baseline", "focal_px", "resolution", "principal_point",
                 "depth_range"}
        kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known}
        if "bf" in d and "baseline" not in d:
            kwargs["baseline"] = float(d["bf"]) / float(d.get("focal_px", DEFAULT_FOCAL_PX))
        return cls(**kwargs)
