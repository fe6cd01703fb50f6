"""Pose accuracy metrics and correctness-versus-threshold curves."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .rasterizer import Pose

logger = logging.getLogger(__name__)

DEFAULT_TRANS_BOUNDS = (0.01, 0.02)
DEFAULT_DOT_BOUNDS = tuple(np.round(np.linspace(1.0, 0.0, 21), 10).tolist())
CONVENTIONS = ("signed", "absolute")


@dataclass(frozen=True)
class PoseError:
    """Euclidean translation error (meters) and the dot product of the two object z-axes."""

    translation_error: float
    rotation_dot: float

    def __post_init__(self):
        if not self.translation_error >= 0:
            raise InvalidInputError("translation error must be nonnegative")


def pose_error(estimate: Pose, truth: Pose) -> PoseError:
    t_err = float(np.linalg.norm(estimate.translation - truth.translation))
    z_est = estimate.rotation_matrix()[:, 2]
    z_gt = truth.rotation_matrix()[:, 2]
    dot = float(np.clip(z_est @ z_gt, -1.0, 1.0))
    return PoseError(t_err, dot)


def is_correct(err: PoseError, trans_bound: float, dot_bound: float,
               convention: str = "signed") -> bool:
    dot = abs(err.rotation_dot) if convention == "absolute" else err.rotation_dot
    return err.translation_error <= trans_bound and dot >= dot_bound


def correctness_curve(errors: Sequence[PoseError], trans_bound: float,
                      dot_bounds: Sequence[float] = DEFAULT_DOT_BOUNDS) -> dict[str, list[float]]:
    """Fraction of trials counted correct at each dot bound.

    Returns ``{"signed": [...], "absolute": [...]}`` aligned with
    ``dot_bounds``. The absolute convention accepts a flipped z-axis, which
    is the right reading for objects symmetric under that flip.

    Raises:
        InvalidInputError: ``errors`` is empty.
    """
    if len(errors) == 0:
        raise InvalidInputError("correctness curve needs at least one trial")
    n = len(errors)
    return {conv: [sum(is_correct(e, trans_bound, b, conv) for e in errors) / n for b in dot_bounds]
            for conv in CONVENTIONS}


def curve_rows(errors: Sequence[PoseError], trans_bounds: Sequence[float] = DEFAULT_TRANS_BOUNDS,
               dot_bounds: Sequence[float] = DEFAULT_DOT_BOUNDS) -> list[dict]:
    rows = []
    for tb in trans_bounds:
        curves = correctness_curve(errors, tb, dot_bounds)
        for conv in CONVENTIONS:
            for b, frac in zip(dot_bounds, curves[conv]):
                rows.append({"trans_bound": tb, "dot_bound": b, "convention": conv, "fraction": frac})
    return rows


def write_curve_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["trans_bound", "dot_bound", "convention", "fraction"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def plot_curves(path, rows: list[dict]) -> None:
    """Line plot of fraction correct versus dot bound, one line per translation bound and convention."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed metadata keeps the SVG byte-identical across runs
    matplotlib.rcParams["svg.hashsalt"] = "plenmcl"
    fig, ax = plt.subplots(figsize=(5, 4))
    keys = sorted({(r["trans_bound"], r["convention"]) for r in rows})
    for tb, conv in keys:
        sel = [r for r in rows if r["trans_bound"] == tb and r["convention"] == conv]
        ax.plot([r["dot_bound"] for r in sel], [r["fraction"] for r in sel],
                linestyle="-" if conv == "signed" else "--", marker="o", markersize=3,
                label=f"{tb * 100:g} cm, {conv}")
    ax.set_xlabel("z-axis dot product bound")
    ax.set_ylabel("fraction correctly localized")
    ax.set_xlim(1.0, 0.0)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
