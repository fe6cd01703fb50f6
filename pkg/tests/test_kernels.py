"""The compiled kernels must agree with the numpy reference implementations."""
import numpy as np
import pytest

from plenmcl import _kernels

if "cython" not in _kernels.available_backends():
    pytest.skip("compiled kernels not built", allow_module_level=True)

CY = _kernels.load_backend("cython")
PY = _kernels.load_backend("python")


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.mark.parametrize("shift", [(0.0, 0.0), (0.37, -1.2), (-3.9, 2.5), (1.0, 1.0)])
def test_bilinear_shift(rng, shift):
    img = rng.random((17, 23, 9))
    a, va = CY.bilinear_shift(img, *shift)
    b, vb = PY.bilinear_shift(img, *shift)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(va, vb)


def test_label_costs(rng):
    h, w, n_views = 14, 15, 6
    center = rng.random((h, w, 9))
    views = rng.random((n_views, h, w, 9))
    offsets = rng.integers(-3, 4, size=(n_views, 2)).astype(np.float64)
    gammas = rng.random(n_views)
    disp = np.linspace(0.1, 0.9, 5)
    out_c = CY.label_costs(center, views, offsets, gammas, disp, 0.5, 0.3, 0.4)
    out_p = PY.label_costs(center, views, offsets, gammas, disp, 0.5, 0.3, 0.4)
    np.testing.assert_allclose(out_c[0], out_p[0], rtol=1e-12, atol=1e-13)
    np.testing.assert_array_equal(out_c[1], out_p[1])


def test_rasterize(rng):
    verts = rng.uniform(-0.2, 0.2, (60, 3)) + [0, 0, 0.6]
    tris = rng.integers(0, 60, (80, 3))
    tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])]
    args = (verts, tris, 80.0, 80.0, 20.0, 18.5, 40, 42)
    np.testing.assert_array_equal(CY.rasterize(*args), PY.rasterize(*args))


def test_score_depth(rng):
    values = rng.random((20, 21, 7))
    labels = np.linspace(0.4, 1.0, 7)
    coverage = rng.random((20, 21)) > 0.2
    depth = rng.uniform(0.0, 1.2, (20, 21))
    depth[depth < 0.2] = 0.0
    tc, nc = CY.score_depth(values, labels, coverage, depth)
    tp, np_ = PY.score_depth(values, labels, coverage, depth)
    assert nc == np_
    assert tc == pytest.approx(tp, rel=1e-13)


@pytest.mark.parametrize("n_lm,k_lm", [(1, 0), (2, 2), (3, 1), (5, 4)])
def test_truncate_profiles(rng, n_lm, k_lm):
    values = rng.random((200, 12))
    values[::7] = 0.5  # flat rows have no strict maxima
    np.testing.assert_array_equal(CY.truncate_profiles(values, n_lm, k_lm),
                                  PY.truncate_profiles(values, n_lm, k_lm))


def test_forced_fallback(monkeypatch):
    import importlib
    monkeypatch.setenv("PLENMCL_PURE_PYTHON", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("PLENMCL_PURE_PYTHON")
        importlib.reload(_kernels)
