"""Command-line entry point: ``plenmcl {synth,dlv,localize,eval,lemma-check}``.

Stages talk through files only: a stack directory, a DLV1 volume, result
JSON. Each output gets a ``<output>.params.json`` sidecar (``params.json``
inside directories) echoing every parameter used, so a run can be repeated
exactly.

Exit codes: 0 success, 2 invalid input, 3 localization did not converge,
4 an internal invariant failed.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from pathlib import Path

import cv2
import numpy as np

from . import __version__, dlv as dlv_mod, evaluation, pmcl, raymodel, synth
from ._kernels import BACKEND
from .camera import PlenopticCamera
from .errors import InvalidInputError, TotalLikelihoodFailure
from .rasterizer import Pose, TriangleMesh

logger = logging.getLogger("plenmcl")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_INVARIANT = 4

DEFAULTS = {
    "synth": {"supersample": 4, "bit_depth": 16, "edge_mask": True, "camera": None},
    "dlv": {"labels": 75, "depth_min": None, "depth_max": None, "beta": 0.5, "tau1": 0.5,
            "tau2": 0.5, "window": 1, "use_edge_views": False, "n_lm": 2, "k_lm": 2,
            "slices": None, "argmax": None, "backend": None},
    "localize": {"camera": None, "roi": None, "roi_center": None, "roi_half": 0.03,
                 "rotation_prior": "so3", "particles": 100, "iterations": 500,
                 "sigma_t": 0.005, "sigma_r": 0.05, "stop_threshold": None,
                 "anneal_every": 100, "anneal_factor": 0.5, "workers": 1, "backend": None},
    "eval": {"trans_bounds": list(evaluation.DEFAULT_TRANS_BOUNDS),
             "dot_bounds": list(evaluation.DEFAULT_DOT_BOUNDS), "plot": None},
    "lemma-check": {"alphas": [round(0.05 * k, 10) for k in range(1, 11)],
                    "deltas": [0.05, 0.1, 0.2], "sigmas": [0.05, 0.1], "rtol": 1e-5},
}


class InvariantViolation(RuntimeError):
    """A computed result broke a property the pipeline guarantees."""


# ---------------------------------------------------------------- helpers

def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sidecar(path: Path) -> Path:
    return path / "params.json" if path.is_dir() else path.with_name(path.name + ".params.json")


def _echo(params: dict, command: str) -> dict:
    clean = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()
             if k not in ("func", "config")}
    return {"command": command, "version": __version__, "backend": params.get("backend") or BACKEND,
            "params": clean}


def _merge(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then ``--config`` JSON, then explicit flags."""
    params = dict(DEFAULTS.get(command, {}))
    given = vars(ns)
    if given.get("config"):
        path = Path(given["config"])
        try:
            cfg = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise InvalidInputError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(cfg, dict):
            raise InvalidInputError(f"{path}: config must be a JSON object")
        params.update({k.replace("-", "_"): v for k, v in cfg.items()})
    params.update(given)
    return params


def _camera_from(params: dict, fallback: PlenopticCamera | None = None) -> PlenopticCamera:
    cam = params.get("camera")
    if cam is None:
        if fallback is None:
            return PlenopticCamera()
        return fallback
    if isinstance(cam, (str, Path)):
        doc = json.loads(Path(cam).read_text())
        cam = doc.get("camera", doc)
    return PlenopticCamera.from_dict(cam)


def _save_png16(path, img01) -> None:
    arr = np.rint(np.clip(img01, 0.0, 1.0) * 65535.0).astype(np.uint16)
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"failed to write {path}")


# ---------------------------------------------------------------- synth

def cmd_synth(p: dict) -> int:
    scene_path = Path(p["scene"])
    if not scene_path.exists():
        raise InvalidInputError(f"scene file {scene_path} not found")
    scene, doc = synth.load_scene(scene_path)
    seed = int(p["seed"])
    scene = synth.SyntheticScene(scene.layers, scene.background, seed)
    cam_params = dict(p)
    if cam_params.get("camera") is None and "camera" in doc:
        cam_params["camera"] = doc["camera"]
    camera = _camera_from(cam_params)
    stack = synth.render_stack(scene, camera, supersample=int(p["supersample"]),
                               mask_edge_views=bool(p["edge_mask"]))
    out = Path(p["out"])
    echo = _echo({**p, "camera": camera.to_dict(), "scene_doc": doc}, "synth")
    synth.save_stack(stack, out, bit_depth=int(p["bit_depth"]), extra_meta={"generator": echo})
    _write_json(out / "truth.json", {**synth.truth_record(scene, camera), "camera": camera.to_dict()})
    meshes = scene.mesh_layers()
    if meshes:
        meshes[0].mesh.save_obj(out / "object.obj")
    _write_json(_sidecar(out), echo)
    logger.info("wrote %d views to %s", camera.grid[0] * camera.grid[1], out)
    return EXIT_OK


# ---------------------------------------------------------------- dlv

def cmd_dlv(p: dict) -> int:
    stack_dir = Path(p["stack"])
    if not stack_dir.is_dir():
        raise InvalidInputError(f"stack directory {stack_dir} not found")
    stack = synth.load_stack(stack_dir)
    cam = stack.camera
    lo = cam.depth_range[0] if p["depth_min"] is None else float(p["depth_min"])
    hi = cam.depth_range[1] if p["depth_max"] is None else float(p["depth_max"])
    labels = dlv_mod.DepthLabels.uniform_disparity(lo, hi, int(p["labels"]), cam.bf)
    params = dlv_mod.CostVolumeParams(float(p["beta"]), float(p["tau1"]), float(p["tau2"]),
                                      int(p["window"]), bool(p["use_edge_views"]))
    n_lm = int(p["n_lm"]) if p["n_lm"] else None
    volume = dlv_mod.build_dlv(stack, labels, params, n_lm=n_lm, k_lm=int(p["k_lm"]),
                               backend=p["backend"])
    _check_dlv(volume)
    out = Path(p["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dlv_mod.write_dlv(out, volume)
    echo = _echo(p, "dlv")
    echo.update({"camera": cam.to_dict(), "labels": labels.values.tolist(),
                 "truncation": list(volume.truncation) if volume.truncation else None,
                 "stack_seed": stack.seed})
    _write_json(_sidecar(out), echo)
    if p["slices"]:
        sdir = Path(p["slices"])
        sdir.mkdir(parents=True, exist_ok=True)
        peak = max(float(volume.values.max()), 1e-12)
        for l in range(labels.count):
            _save_png16(sdir / f"slice_{l:03d}.png", volume.values[:, :, l] / peak)
    if p["argmax"]:
        depth = volume.argmax_depth()
        scaled = np.where(volume.coverage, (depth - labels.values[0]) / (labels.values[-1] - labels.values[0]), 0.0)
        Path(p["argmax"]).parent.mkdir(parents=True, exist_ok=True)
        _save_png16(p["argmax"], scaled)
    logger.info("wrote %s (%d x %d x %d)", out, *volume.values.shape)
    return EXIT_OK


def _check_dlv(volume) -> None:
    v = volume.values
    if not np.all(np.isfinite(v)) or v.min() < 0:
        raise InvariantViolation("volume has negative or non-finite likelihoods")


# ---------------------------------------------------------------- localize

def _load_dlv_with_camera(path: Path, camera_arg):
    volume = dlv_mod.read_dlv(path)
    side = _sidecar(path)
    side_doc = json.loads(side.read_text()) if side.exists() else {}
    if camera_arg is not None:
        camera = _camera_from({"camera": camera_arg})
    elif "camera" in side_doc:
        camera = PlenopticCamera.from_dict(side_doc["camera"])
    else:
        raise InvalidInputError(f"no camera given and {side} is missing")
    volume = dlv_mod.DepthLikelihoodVolume(volume.values, dlv_mod.DepthLabels(volume.labels.values, camera.bf),
                                           volume.coverage, tuple(side_doc["truncation"])
                                           if side_doc.get("truncation") else None)
    return volume, camera


def _roi_from(p: dict) -> pmcl.RegionOfInterest:
    if p.get("roi") is not None:
        roi = p["roi"]
        if isinstance(roi, str):
            roi = json.loads(Path(roi).read_text())
        return pmcl.RegionOfInterest.from_dict(roi)
    if p.get("roi_center") is None:
        raise InvalidInputError("give --roi or --roi-center")
    return pmcl.RegionOfInterest.around(p["roi_center"], float(p["roi_half"]),
                                        rotation=p["rotation_prior"])


def cmd_localize(p: dict) -> int:
    dlv_path, mesh_path = Path(p["dlv"]), Path(p["mesh"])
    for path in (dlv_path, mesh_path):
        if not path.exists():
            raise InvalidInputError(f"{path} not found")
    volume, camera = _load_dlv_with_camera(dlv_path, p.get("camera"))
    mesh = TriangleMesh.load_obj(mesh_path)
    roi = _roi_from(p)
    cfg = pmcl.PmclConfig(particle_count=int(p["particles"]), max_iterations=int(p["iterations"]),
                          sigma_t=float(p["sigma_t"]), sigma_r=float(p["sigma_r"]),
                          stop_threshold=None if p["stop_threshold"] is None else float(p["stop_threshold"]),
                          anneal_every=int(p["anneal_every"]), anneal_factor=float(p["anneal_factor"]),
                          seed=int(p["seed"]), workers=int(p["workers"]))
    result = pmcl.localize(volume, mesh, camera, roi, cfg, backend=p["backend"])
    trace = np.asarray(result.best_trace)
    if np.any(np.diff(trace) < 0):
        raise InvariantViolation("best-score trace decreased")
    out = Path(p["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = result.to_dict()
    doc["dlv"] = str(dlv_path)
    doc["mesh"] = str(mesh_path)
    _write_json(out, doc)
    _write_json(_sidecar(out), _echo({**p, "roi": roi.to_dict()}, "localize"))
    if not result.converged:
        logger.warning("no convergence after %d iterations (best %.4g < threshold %.4g)",
                       result.iterations, result.estimate.score, result.stop_threshold)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------- eval

def _truth_pose(doc: dict) -> Pose:
    if "object_pose" in doc:
        return Pose.from_dict(doc["object_pose"])
    if "pose" in doc:
        return Pose.from_dict(doc["pose"])
    raise InvalidInputError("truth file has neither 'object_pose' nor 'pose'")


def _has_object_pose(path: Path) -> bool:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(doc, dict) and "object_pose" in doc


def _truth_index(truth_arg) -> tuple[dict[str, Path], set[str]]:
    """Map trial name to truth file.

    Entries are ``<name>.json`` files or directories holding ``<name>.json``
    and ``<name>/truth.json`` records. Inside directories only files with an
    ``object_pose`` count, so unrelated JSON is skipped. Returns the index and
    the names given as explicit files, which must all be matched.
    """
    index, explicit = {}, set()
    for entry in truth_arg:
        path = Path(entry)
        if path.is_file():
            name = path.parent.name if path.name == "truth.json" else path.stem
            index[name] = path
            explicit.add(name)
        elif path.is_dir():
            for f in sorted(path.glob("*.json")):
                if not f.name.endswith(".params.json") and _has_object_pose(f):
                    index[f.stem] = f
            for f in sorted(path.glob("*/truth.json")):
                index[f.parent.name] = f
        else:
            raise InvalidInputError(f"truth path {path} not found")
    return index, explicit


def cmd_eval(p: dict) -> int:
    results_dir = Path(p["results"])
    if not results_dir.is_dir():
        raise InvalidInputError(f"results directory {results_dir} not found")
    results = {f.stem: f for f in sorted(results_dir.glob("*.json"))
               if not f.name.endswith(".params.json")}
    if not results:
        raise InvalidInputError(f"no result files in {results_dir}")
    truths, explicit = _truth_index(p["truth"])
    missing = sorted((set(results) - set(truths)) | (explicit - set(results)))
    if missing:
        raise InvalidInputError("unmatched result/truth pairs: " + ", ".join(missing))
    errors = []
    per_trial = []
    for name in sorted(results):
        est = Pose.from_dict(json.loads(results[name].read_text())["pose"])
        gt = _truth_pose(json.loads(truths[name].read_text()))
        err = evaluation.pose_error(est, gt)
        errors.append(err)
        per_trial.append({"trial": name, "translation_error": err.translation_error,
                          "rotation_dot": err.rotation_dot})
    rows = evaluation.curve_rows(errors, [float(b) for b in p["trans_bounds"]],
                                 [float(b) for b in p["dot_bounds"]])
    out = Path(p["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_curve_csv(out, rows)
    if p["plot"]:
        evaluation.plot_curves(p["plot"], rows)
    _write_json(_sidecar(out), {**_echo(p, "eval"), "trials": per_trial})
    return EXIT_OK


# ---------------------------------------------------------------- lemma-check

LEMMA_FIELDS = ["alpha", "delta", "sigma", "d12", "d13", "d14", "d12_quad", "d13_quad",
                "d14_quad", "max_rel_err", "L_dp", "L_dg", "L_di", "dist_ok", "norm_ok",
                "monotone_ok", "pass"]


def lemma_rows(alphas, deltas, sigmas, rtol: float = 1e-5) -> list[dict]:
    """Closed form against quadrature for every (alpha, delta, sigma) in the grid.

    The quadrature side integrates concrete mixtures whose front and back
    surfaces vary in separate channels. That realization has no cross terms,
    so its distances are exactly twice the simplified closed forms.
    """
    rows = []
    alphas = sorted(float(a) for a in alphas)
    for delta, sigma in itertools.product(deltas, sigmas):
        prev_dg = -math.inf
        for alpha in alphas:
            sc = raymodel.TwoLayerScenario(alpha, float(delta), float(sigma))
            d12, d13, d14 = raymodel.two_layer_distances(sc)
            r1, r2, r3, r4 = raymodel.two_layer_rays(sc, separate_channels=True)
            quad = [0.5 * raymodel.quadrature_l2_distance(r1, r) for r in (r2, r3, r4)]
            rel = [_rel_err(c, q) for c, q in zip((d12, d13, d14), quad)]
            l_dp, l_dg, l_di = raymodel.analytic_two_layer_dlv(sc)
            dist_ok = max(rel) <= rtol
            norm_ok = l_dp + l_dg == 1.0 and l_di == 0.0
            mono_ok = l_dg > prev_dg
            prev_dg = l_dg
            rows.append({"alpha": alpha, "delta": float(delta), "sigma": float(sigma),
                         "d12": d12, "d13": d13, "d14": d14, "d12_quad": quad[0],
                         "d13_quad": quad[1], "d14_quad": quad[2], "max_rel_err": max(rel),
                         "L_dp": l_dp, "L_dg": l_dg, "L_di": l_di, "dist_ok": dist_ok,
                         "norm_ok": norm_ok, "monotone_ok": mono_ok,
                         "pass": dist_ok and norm_ok and mono_ok})
    return rows


def _rel_err(closed: float, quad: float) -> float:
    if closed == 0.0:
        return abs(quad)
    return abs(quad - closed) / abs(closed)


def cmd_lemma_check(p: dict) -> int:
    rows = lemma_rows(p["alphas"], p["deltas"], p["sigmas"], float(p["rtol"]))
    out = Path(p["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEMMA_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    failed = [r for r in rows if not r["pass"]]
    _write_json(_sidecar(out), {**_echo(p, "lemma-check"), "rows": len(rows), "failed": len(failed)})
    if failed:
        for r in failed[:10]:
            logger.error("lemma check failed at alpha=%g delta=%g sigma=%g", r["alpha"], r["delta"], r["sigma"])
        raise InvariantViolation(f"{len(failed)} of {len(rows)} lemma checks failed")
    logger.info("all %d lemma checks passed", len(rows))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plenmcl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, argument_default=S)
        sp.add_argument("--config", help="JSON file of parameters; explicit flags take precedence")
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "render a scene JSON into a sub-aperture stack directory")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--camera", help="camera JSON (overrides the scene's 'camera' entry)")
    sp.add_argument("--supersample", type=int)
    sp.add_argument("--bit-depth", type=int, choices=(8, 16))
    sp.add_argument("--no-edge-mask", dest="edge_mask", action="store_false")

    sp = add("dlv", cmd_dlv, "build a depth likelihood volume from a stack")
    sp.add_argument("--stack", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--labels", type=int, help="number of depth labels (default 75)")
    sp.add_argument("--depth-min", type=float)
    sp.add_argument("--depth-max", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--tau1", type=float)
    sp.add_argument("--tau2", type=float)
    sp.add_argument("--window", type=int)
    sp.add_argument("--use-edge-views", action="store_true")
    sp.add_argument("--n-lm", type=int, help="peaks kept per pixel; 0 disables truncation")
    sp.add_argument("--k-lm", type=int)
    sp.add_argument("--slices", help="directory for per-label likelihood PNGs")
    sp.add_argument("--argmax", help="PNG path for the per-pixel argmax depth map")
    sp.add_argument("--backend", choices=("cython", "python"))

    sp = add("localize", cmd_localize, "estimate an object pose from a volume and a mesh")
    sp.add_argument("--dlv", required=True)
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--camera", help="camera JSON (default: the volume's sidecar)")
    sp.add_argument("--roi", help="ROI JSON file")
    sp.add_argument("--roi-center", type=float, nargs=3)
    sp.add_argument("--roi-half", type=float)
    sp.add_argument("--rotation-prior", choices=pmcl.ROTATION_PRIORS)
    sp.add_argument("--particles", type=int)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--sigma-t", type=float)
    sp.add_argument("--sigma-r", type=float)
    sp.add_argument("--stop-threshold", type=float)
    sp.add_argument("--anneal-every", type=int)
    sp.add_argument("--anneal-factor", type=float)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--backend", choices=("cython", "python"))

    sp = add("eval", cmd_eval, "correctness curves from localization results")
    sp.add_argument("--results", required=True, help="directory of result JSON files")
    sp.add_argument("--truth", required=True, nargs="+",
                    help="truth JSON files or directories (matched to results by name)")
    sp.add_argument("--out", required=True, help="CSV path")
    sp.add_argument("--trans-bounds", type=_floats)
    sp.add_argument("--dot-bounds", type=_floats)
    sp.add_argument("--plot", help="SVG path")

    sp = add("lemma-check", cmd_lemma_check, "verify the two-layer closed forms over a grid")
    sp.add_argument("--out", required=True)
    sp.add_argument("--alphas", type=_floats)
    sp.add_argument("--deltas", type=_floats)
    sp.add_argument("--sigmas", type=_floats)
    sp.add_argument("--rtol", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    func = ns.func
    command = ns.command
    given = argparse.Namespace(**{k: v for k, v in vars(ns).items()
                                  if k not in ("func", "verbose", "command")})
    try:
        return func(_merge(command, given))
    except (InvalidInputError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"plenmcl {command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TotalLikelihoodFailure as exc:
        print(f"plenmcl {command}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except InvariantViolation as exc:
        print(f"plenmcl {command}: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
