import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from plenmcl.errors import InvalidInputError
from plenmcl.evaluation import (DEFAULT_DOT_BOUNDS, PoseError, correctness_curve, curve_rows,
                                plot_curves, pose_error, write_curve_csv)
from plenmcl.rasterizer import Pose


def test_identical_poses():
    pose = Pose.from_rotation([0.1, 0.2, 0.5], Rotation.from_euler("xyz", [0.1, 0.2, 0.3]))
    err = pose_error(pose, pose)
    assert err.translation_error == 0.0
    assert err.rotation_dot == pytest.approx(1.0, abs=1e-15)


def test_flip_about_x():
    err = pose_error(Pose.from_rotation([0, 0, 0.5], Rotation.from_euler("x", np.pi)), Pose([0, 0, 0.5]))
    assert err.rotation_dot == pytest.approx(-1.0, abs=1e-15)


def test_three_four_five():
    err = pose_error(Pose([0.003, 0.004, 0.5]), Pose([0.0, 0.0, 0.5]))
    assert err.translation_error == pytest.approx(0.005, rel=1e-12)


def test_yaw_about_z_does_not_change_dot():
    err = pose_error(Pose.from_rotation([0, 0, 0], Rotation.from_euler("z", 1.3)), Pose([0, 0, 0]))
    assert err.rotation_dot == pytest.approx(1.0, abs=1e-15)


def test_negative_translation_error_rejected():
    with pytest.raises(InvalidInputError):
        PoseError(-1e-3, 1.0)


class TestCurve:
    def test_all_perfect(self):
        curves = correctness_curve([PoseError(0.0, 1.0)] * 3, 0.01)
        assert curves["signed"] == [1.0] * len(DEFAULT_DOT_BOUNDS)
        assert curves["absolute"] == [1.0] * len(DEFAULT_DOT_BOUNDS)

    def test_flipped_trial(self):
        curves = correctness_curve([PoseError(0.0, -1.0)], 0.01, [0.9])
        assert curves == {"signed": [0.0], "absolute": [1.0]}

    def test_direct_count(self):
        errs = [PoseError(0.001, 0.95), PoseError(0.001, 0.5)]
        assert correctness_curve(errs, 0.01, [0.8])["signed"] == [0.5]

    def test_translation_bound_inclusive(self):
        assert correctness_curve([PoseError(0.01, 1.0)], 0.01, [1.0])["signed"] == [1.0]
        assert correctness_curve([PoseError(0.0101, 1.0)], 0.01, [0.0])["signed"] == [0.0]

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            correctness_curve([], 0.01)


errors_strategy = st.lists(st.builds(PoseError, st.floats(0.0, 0.05), st.floats(-1.0, 1.0)),
                           min_size=1, max_size=20)


@given(errors_strategy, st.sampled_from([0.01, 0.02]))
def test_curve_properties(errors, tb):
    bounds = sorted(np.linspace(0, 1, 11), reverse=True)
    curves = correctness_curve(errors, tb, bounds)
    for conv in ("signed", "absolute"):
        # bounds descend, so fractions must not decrease along the list
        assert all(a <= b for a, b in zip(curves[conv], curves[conv][1:]))
    assert all(a >= s for a, s in zip(curves["absolute"], curves["signed"]))


def test_csv_and_svg(tmp_path):
    errs = [PoseError(0.004, 0.99), PoseError(0.015, -0.97), PoseError(0.03, 0.2)]
    rows = curve_rows(errs)
    assert len(rows) == 2 * 2 * len(DEFAULT_DOT_BOUNDS)
    write_curve_csv(tmp_path / "c.csv", rows)
    with open(tmp_path / "c.csv") as fh:
        back = list(csv.DictReader(fh))
    assert list(back[0]) == ["trans_bound", "dot_bound", "convention", "fraction"]
    row = next(r for r in back if r["trans_bound"] == "0.02" and r["dot_bound"] == "0.9"
               and r["convention"] == "absolute")
    assert float(row["fraction"]) == pytest.approx(2 / 3)
    plot_curves(tmp_path / "a.svg", rows)
    plot_curves(tmp_path / "b.svg", rows)
    svg = (tmp_path / "a.svg").read_bytes()
    assert svg.startswith(b"<?xml") and svg == (tmp_path / "b.svg").read_bytes()
