"""Gaussian ray-mixture algebra for layered translucent surfaces.

A ray reaching one pixel is modelled per color channel as a weighted mixture
of Gaussians, one component per surface it passes through. Squared L2
distances between such mixtures have closed forms via the Gaussian product
integral

    integral N(x; mu, s1) N(x; mu', s2) dx = N(mu; mu', s1 + s2),

which is what everything in this module is built on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class GaussianComponent:
    """One surface's contribution: weight, per-channel mean color and variance."""

    weight: float
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.variance, dtype=np.float64))
        if var.shape == (1,) and mean.shape != (1,):
            var = np.full(mean.shape, var[0])
        if mean.shape != var.shape or mean.ndim != 1:
            raise InvalidInputError("mean and variance must be 1-d with one entry per channel")
        if not 0.0 <= self.weight <= 1.0:
            raise InvalidInputError(f"component weight {self.weight} outside [0, 1]")
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            raise InvalidInputError("component variance must be strictly positive in every channel")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)


@dataclass(frozen=True)
class GaussianMixtureRay:
    """A ray as a convex combination of Gaussian components sharing one variance."""

    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidInputError("a ray needs at least one component")
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InvalidInputError(f"component weights sum to {total}, expected 1")
        ref = comps[0].variance
        for c in comps[1:]:
            if c.variance.shape != ref.shape:
                raise InvalidInputError("components have different channel counts")
            if not np.array_equal(c.variance, ref):
                raise InvalidInputError("components must share the same per-channel variance")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, means, variance) -> "GaussianMixtureRay":
        """Build from (K,) weights, (K, C) means and a shared (C,) or scalar variance."""
        means = np.asarray(means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        var = np.broadcast_to(np.asarray(variance, dtype=np.float64), means.shape[1:])
        return cls(tuple(GaussianComponent(float(w), m, var) for w, m in zip(weights, means)))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def variance(self) -> np.ndarray:
        return self.components[0].variance

    @property
    def n_channels(self) -> int:
        return self.variance.shape[0]

    def density(self, x, channel: int = 0) -> np.ndarray:
        """Evaluate the mixture density of one channel at points ``x``."""
        x = np.asarray(x, dtype=np.float64)
        var = self.variance[channel]
        out = np.zeros_like(x)
        for c in self.components:
            out += c.weight * gaussian_pdf(x, c.mean[channel], var)
        return out


@dataclass(frozen=True)
class TwoLayerScenario:
    """A translucent front surface over an opaque back surface, seen by one pixel.

    ``alpha`` is the front surface's share of the pixel's light, ``delta`` the
    color change between neighboring points of one surface, and ``sigma`` the
    shared channel standard deviation.
    """

    alpha: float
    delta: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha {self.alpha} outside [0, 1]")
        if self.delta < 0:
            raise InvalidInputError("delta must be non-negative")
        if self.sigma <= 0:
            raise InvalidInputError("sigma must be positive")

    @property
    def self_overlap(self) -> float:
        """Peak of N(0; 0, 2 sigma^2), i.e. 1 / sqrt(4 pi sigma^2)."""
        return 1.0 / math.sqrt(4.0 * math.pi * self.sigma ** 2)


def gaussian_pdf(x, mean, var):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def _cross_overlap(wa, ma, wb, mb, var):
    """sum_ij wa_i wb_j N(ma_i; mb_j, 2 var) for one channel."""
    diff = ma[:, None] - mb[None, :]
    return float(wa @ gaussian_pdf(diff, 0.0, 2.0 * var) @ wb)


def gm_l2_distance(a: GaussianMixtureRay, b: GaussianMixtureRay) -> float:
    """Squared L2 distance between two mixture rays, summed over channels.

    Expands ``(sum_i a_i N_i - sum_j b_j N_j)^2`` with the Gaussian product
    integral, so any component counts are supported.

    Raises:
        InvalidInputError: the rays have different variances or channel counts.
    """
    if a.n_channels != b.n_channels:
        raise InvalidInputError("rays have different channel counts")
    if not np.array_equal(a.variance, b.variance):
        raise InvalidInputError("closed form requires both rays to share the same variance")
    wa, wb = a.weights, b.weights
    ma, mb = a.means, b.means
    total = 0.0
    for ch in range(a.n_channels):
        var = a.variance[ch]
        aa = _cross_overlap(wa, ma[:, ch], wa, ma[:, ch], var)
        bb = _cross_overlap(wb, mb[:, ch], wb, mb[:, ch], var)
        ab = _cross_overlap(wa, ma[:, ch], wb, mb[:, ch], var)
        total += aa + bb - 2.0 * ab
    # cancellation can leave a tiny negative residue for identical rays
    return max(total, 0.0)


def two_layer_distances(s: TwoLayerScenario) -> tuple[float, float, float]:
    """Distances from the center ray to rays matching the back, front and neither surface.

    Returns ``(d12, d13, d14)`` with the constant factor 2 dropped:

    * ``d12``: front surface aligned, back surface offset by ``delta``
      -> ``(1 - alpha)^2 A (1 - exp(-delta^2 / 4 sigma^2))``
    * ``d13``: back surface aligned -> ``alpha^2 A (...)``
    * ``d14``: neither aligned -> ``d12 + d13``
    """
    amp = s.self_overlap
    decay = -math.expm1(-(s.delta ** 2) / (4.0 * s.sigma ** 2))
    back = (1.0 - s.alpha) ** 2
    front = s.alpha ** 2
    d12 = back * amp * decay
    d13 = front * amp * decay
    return d12, d13, d12 + d13


def analytic_two_layer_dlv(s: TwoLayerScenario | float) -> tuple[float, float, float]:
    """Depth likelihoods at the back (opaque), front (translucent) and an invalid depth.

    Accepts a scenario or a bare ``alpha``; the values depend on ``alpha`` only.
    """
    alpha = s.alpha if isinstance(s, TwoLayerScenario) else float(s)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha {alpha} outside [0, 1]")
    back = (1.0 - alpha) ** 2
    front = alpha ** 2
    norm = back + front
    # the smaller share is computed directly and the larger as its complement;
    # with the smaller share <= 0.5 the subtraction is exact enough that the two
    # always sum to exactly 1.0
    if front <= back:
        l_front = front / norm
        return 1.0 - l_front, l_front, 0.0
    l_back = back / norm
    return l_back, 1.0 - l_back, 0.0


def two_layer_rays(s: TwoLayerScenario, front_mean: float = 0.2, back_mean: float = 0.8,
                   separate_channels: bool = False):
    """Concrete mixtures for the center ray and its three stereo candidates.

    Returns ``(rho1, rho2, rho3, rho4)``: ``rho2`` keeps the front color and
    shifts the back by ``delta``, ``rho3`` the reverse, ``rho4`` shifts both.

    With ``separate_channels`` the front surface varies only in channel 0 and
    the back surface only in channel 1 (three channels in total), which makes
    the cross terms between surfaces vanish exactly so the full distances
    equal twice the simplified ones.
    """
    a, d = s.alpha, s.delta
    var = s.sigma ** 2
    if separate_channels:
        f1 = np.array([front_mean, front_mean, front_mean])
        b1 = np.array([back_mean, back_mean, back_mean])
        f2 = f1 + np.array([d, 0.0, 0.0])
        b2 = b1 + np.array([0.0, d, 0.0])
        variance = np.full(3, var)
    else:
        f1, b1 = np.array([front_mean]), np.array([back_mean])
        f2, b2 = f1 + d, b1 + d
        variance = np.array([var])

    def ray(front, back):
        comps = []
        if a > 0:
            comps.append(GaussianComponent(a, front, variance))
        if a < 1:
            comps.append(GaussianComponent(1.0 - a, back, variance))
        return GaussianMixtureRay(tuple(comps))

    return ray(f1, b1), ray(f1, b2), ray(f2, b1), ray(f2, b2)


def quadrature_l2_distance(a: GaussianMixtureRay, b: GaussianMixtureRay,
                           step: float = 1e-4, tails: float = 5.0) -> float:
    """Trapezoid-rule estimate of the squared L2 distance, summed over channels.

    Independent of the closed form; integrates over
    ``[min mean - tails * sigma, max mean + tails * sigma]`` per channel.
    """
    total = 0.0
    for ch in range(a.n_channels):
        sig = math.sqrt(max(a.variance[ch], b.variance[ch]))
        means = np.concatenate([a.means[:, ch], b.means[:, ch]])
        lo = means.min() - tails * sig
        hi = means.max() + tails * sig
        n = int(math.ceil((hi - lo) / step)) + 1
        x = np.linspace(lo, hi, n)
        diff = a.density(x, ch) - b.density(x, ch)
        total += float(np.trapezoid(diff * diff, x))
    return total
