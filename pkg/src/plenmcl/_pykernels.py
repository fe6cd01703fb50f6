"""Reference numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The two are checked against each other in ``tests/test_kernels.py``.
"""
import numpy as np

NEAR_PLANE = 1e-3


def bilinear_shift(image, dx, dy):
    """Resample ``image`` at ``(x + dx, y + dy)``.

    Returns the shifted image and a boolean mask of samples that fell inside
    the source frame.
    """
    h, w = image.shape[:2]
    x0 = int(np.floor(dx))
    y0 = int(np.floor(dy))
    fx = dx - x0
    fy = dy - y0
    cols = np.arange(w)
    rows = np.arange(h)
    c0 = np.clip(cols + x0, 0, w - 1)
    c1 = np.clip(cols + x0 + 1, 0, w - 1)
    r0 = np.clip(rows + y0, 0, h - 1)
    r1 = np.clip(rows + y0 + 1, 0, h - 1)
    xs = cols + dx
    ys = rows + dy
    valid = ((ys >= 0) & (ys <= h - 1))[:, None] & ((xs >= 0) & (xs <= w - 1))[None, :]
    top = (1.0 - fx) * image[r0][:, c0] + fx * image[r0][:, c1]
    bot = (1.0 - fx) * image[r1][:, c0] + fx * image[r1][:, c1]
    return (1.0 - fy) * top + fy * bot, valid


def label_costs(center, views, offsets, gammas, disparities, beta, tau1, tau2):
    """Accumulate per-pixel truncated matching costs over views for every label.

    Args:
        center: (H, W, 9) center-view features: rgb, x-gradients, y-gradients.
        views: (V, H, W, 9) features of the views being compared.
        offsets: (V, 2) view offsets (s - s_c, t - t_c).
        gammas: (V,) x-gradient weights.
        disparities: (L,) pixel disparity per unit view offset.

    Returns:
        ``(num, cnt)``, each (H, W, L): cost summed over in-bounds views and
        the number of such views.
    """
    h, w, _ = center.shape
    n_labels = len(disparities)
    num = np.zeros((h, w, n_labels))
    cnt = np.zeros((h, w, n_labels))
    for l, disp in enumerate(disparities):
        for v in range(len(views)):
            shifted, valid = bilinear_shift(views[v], offsets[v, 0] * disp, offsets[v, 1] * disp)
            diff = np.abs(center - shifted)
            color = np.minimum(diff[..., 0:3], tau1).sum(axis=-1)
            grad_x = np.minimum(diff[..., 3:6], tau2).sum(axis=-1)
            grad_y = np.minimum(diff[..., 6:9], tau2).sum(axis=-1)
            g = gammas[v]
            term = beta * color + (1.0 - beta) * (g * grad_x + (1.0 - g) * grad_y)
            num[..., l] += np.where(valid, term, 0.0)
            cnt[..., l] += valid
    return num, cnt


def _top_left(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return (dy == 0 and dx > 0) or dy < 0


def rasterize(vertices, triangles, fx, fy, cx, cy, height, width):
    """Z-buffer camera-space vertices into an (H, W) depth map; 0 marks no coverage.

    Triangles with any vertex closer than ``NEAR_PLANE`` are skipped.
    """
    depth = np.full((height, width), np.inf)
    z = vertices[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * vertices[:, 0] / z + cx
        v = fy * vertices[:, 1] / z + cy
    for tri in triangles:
        ia, ib, ic = int(tri[0]), int(tri[1]), int(tri[2])
        if z[ia] <= NEAR_PLANE or z[ib] <= NEAR_PLANE or z[ic] <= NEAR_PLANE:
            continue
        ax, ay, bx, by, qx, qy = u[ia], v[ia], u[ib], v[ib], u[ic], v[ic]
        za, zb, zc = z[ia], z[ib], z[ic]
        area = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
        if area == 0.0:
            continue
        if area < 0.0:
            bx, by, qx, qy = qx, qy, bx, by
            zb, zc = zc, zb
            area = -area
        xmin = max(int(np.ceil(min(ax, bx, qx))), 0)
        xmax = min(int(np.floor(max(ax, bx, qx))), width - 1)
        ymin = max(int(np.ceil(min(ay, by, qy))), 0)
        ymax = min(int(np.floor(max(ay, by, qy))), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        px, py = np.meshgrid(np.arange(xmin, xmax + 1, dtype=float),
                             np.arange(ymin, ymax + 1, dtype=float))
        w0 = (qx - bx) * (py - by) - (qy - by) * (px - bx)
        w1 = (ax - qx) * (py - qy) - (ay - qy) * (px - qx)
        w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        inside = ((w0 > 0) | ((w0 == 0) & _top_left(bx, by, qx, qy)))
        inside &= ((w1 > 0) | ((w1 == 0) & _top_left(qx, qy, ax, ay)))
        inside &= ((w2 > 0) | ((w2 == 0) & _top_left(ax, ay, bx, by)))
        if not inside.any():
            continue
        if za == zb == zc:
            # fronto-parallel facet: skip the interpolation round-off
            zz = np.full(inside.shape, za)
        else:
            zz = 1.0 / ((w0 / za + w1 / zb + w2 / zc) / area)
        block = depth[ymin:ymax + 1, xmin:xmax + 1]
        np.copyto(block, np.minimum(block, zz), where=inside)
    depth[np.isinf(depth)] = 0.0
    return depth


def score_depth(values, labels, coverage, depth):
    """Sum of interpolated likelihoods over supported pixels, and their count."""
    lo, hi = labels[0], labels[-1]
    ok = coverage & (depth > 0) & (depth >= lo) & (depth <= hi)
    rows, cols = np.nonzero(ok)
    if rows.size == 0:
        return 0.0, 0
    z = depth[rows, cols]
    n = np.clip(np.searchsorted(labels, z, side="right") - 1, 0, len(labels) - 2)
    t = (z - labels[n]) / (labels[n + 1] - labels[n])
    vals = (1.0 - t) * values[rows, cols, n] + t * values[rows, cols, n + 1]
    total = 0.0
    for x in vals:
        total += x
    return float(total), int(rows.size)


def truncate_profiles(values, n_lm, k_lm):
    """Keep the ``n_lm`` largest strict local maxima of each row plus ``k_lm`` neighbors."""
    profiles = np.asarray(values, dtype=np.float64)
    p, n_labels = profiles.shape
    left = np.full_like(profiles, -np.inf)
    right = np.full_like(profiles, -np.inf)
    left[:, 1:] = profiles[:, :-1]
    right[:, :-1] = profiles[:, 1:]
    is_max = (profiles > left) & (profiles > right)
    key = np.where(is_max, profiles, -np.inf)
    order = np.argsort(-key, axis=1, kind="stable")[:, :n_lm]
    picked = np.take_along_axis(is_max, order, axis=1)
    keep = np.zeros_like(is_max)
    rows = np.repeat(np.arange(p)[:, None], order.shape[1], axis=1)
    for off in range(-k_lm, k_lm + 1):
        idx = order + off
        ok = picked & (idx >= 0) & (idx < n_labels)
        keep[rows[ok], idx[ok]] = True
    return np.where(keep, profiles, 0.0)
