# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures and results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, fabs, INFINITY

cnp.import_array()

NEAR_PLANE = 1e-3
cdef double _NEAR = 1e-3


cdef inline double _sample(const double[:, :, ::1] img, int r0, int r1, int c0, int c1,
                           double fx, double fy, int ch) noexcept nogil:
    cdef double top = (1.0 - fx) * img[r0, c0, ch] + fx * img[r0, c1, ch]
    cdef double bot = (1.0 - fx) * img[r1, c0, ch] + fx * img[r1, c1, ch]
    return (1.0 - fy) * top + fy * bot


cdef inline double _sample4(const double[:, :, :, ::1] img, int v, int r0, int r1, int c0,
                            int c1, double fx, double fy, int ch) noexcept nogil:
    cdef double top = (1.0 - fx) * img[v, r0, c0, ch] + fx * img[v, r0, c1, ch]
    cdef double bot = (1.0 - fx) * img[v, r1, c0, ch] + fx * img[v, r1, c1, ch]
    return (1.0 - fy) * top + fy * bot


cdef inline double _clampd(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline int _clampi(int x, int lo, int hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def bilinear_shift(image, double dx, double dy):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] src = np.ascontiguousarray(
        image if image.ndim == 3 else image[:, :, None], dtype=np.float64)
    cdef const double[:, :, ::1] img = src
    cdef int h = img.shape[0], w = img.shape[1], nc = img.shape[2]
    out = np.empty((h, w, nc))
    valid = np.empty((h, w), dtype=bool)
    cdef double[:, :, ::1] o = out
    cdef cnp.npy_bool[:, ::1] m = valid
    cdef int x0 = <int>floor(dx), y0 = <int>floor(dy)
    cdef double fx = dx - x0, fy = dy - y0
    cdef int i, j, ch, r0, r1, c0, c1
    with nogil:
        for i in range(h):
            r0 = _clampi(i + y0, 0, h - 1)
            r1 = _clampi(i + y0 + 1, 0, h - 1)
            for j in range(w):
                c0 = _clampi(j + x0, 0, w - 1)
                c1 = _clampi(j + x0 + 1, 0, w - 1)
                m[i, j] = (i + dy >= 0) and (i + dy <= h - 1) and (j + dx >= 0) and (j + dx <= w - 1)
                for ch in range(nc):
                    o[i, j, ch] = _sample(img, r0, r1, c0, c1, fx, fy, ch)
    if image.ndim == 2:
        out = out[:, :, 0]
    return out, valid


def label_costs(center, views, offsets, gammas, disparities,
                double beta, double tau1, double tau2):
    cdef const double[:, :, ::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[:, :, :, ::1] vw = np.ascontiguousarray(views, dtype=np.float64)
    cdef const double[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[::1] gam = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef const double[::1] disp = np.ascontiguousarray(disparities, dtype=np.float64)
    cdef int h = c.shape[0], w = c.shape[1], nv = vw.shape[0], nl = disp.shape[0]
    num = np.zeros((h, w, nl))
    cnt = np.zeros((h, w, nl))
    cdef double[:, :, ::1] nm = num
    cdef double[:, :, ::1] ct = cnt
    cdef int l, v, i, j, ch, x0, y0, r0, r1, c0, c1
    cdef double dx, dy, fx, fy, d, color, gx, gy, g, term
    with nogil:
        for l in range(nl):
            for v in range(nv):
                dx = off[v, 0] * disp[l]
                dy = off[v, 1] * disp[l]
                x0 = <int>floor(dx)
                y0 = <int>floor(dy)
                fx = dx - x0
                fy = dy - y0
                g = gam[v]
                for i in range(h):
                    if i + dy < 0 or i + dy > h - 1:
                        continue
                    r0 = _clampi(i + y0, 0, h - 1)
                    r1 = _clampi(i + y0 + 1, 0, h - 1)
                    for j in range(w):
                        if j + dx < 0 or j + dx > w - 1:
                            continue
                        c0 = _clampi(j + x0, 0, w - 1)
                        c1 = _clampi(j + x0 + 1, 0, w - 1)
                        color = 0.0
                        for ch in range(3):
                            d = fabs(c[i, j, ch] - _sample4(vw, v, r0, r1, c0, c1, fx, fy, ch))
                            color = color + (d if d < tau1 else tau1)
                        gx = 0.0
                        for ch in range(3, 6):
                            d = fabs(c[i, j, ch] - _sample4(vw, v, r0, r1, c0, c1, fx, fy, ch))
                            gx = gx + (d if d < tau2 else tau2)
                        gy = 0.0
                        for ch in range(6, 9):
                            d = fabs(c[i, j, ch] - _sample4(vw, v, r0, r1, c0, c1, fx, fy, ch))
                            gy = gy + (d if d < tau2 else tau2)
                        term = beta * color + (1.0 - beta) * (g * gx + (1.0 - g) * gy)
                        nm[i, j, l] += term
                        ct[i, j, l] += 1.0
    return num, cnt


cdef inline bint _top_left(double ax, double ay, double bx, double by) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay
    return (dy == 0 and dx > 0) or dy < 0


cdef inline bint _covers(double wgt, bint tl) noexcept nogil:
    return wgt > 0 or (wgt == 0 and tl)


def rasterize(vertices, triangles, double fx, double fy, double cx, double cy,
              int height, int width):
    cdef const double[:, ::1] vt = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef const long long[:, ::1] tr = np.ascontiguousarray(triangles, dtype=np.int64)
    depth = np.full((height, width), np.inf)
    cdef double[:, ::1] dep = depth
    cdef int nt = tr.shape[0], t, x, y, xmin, xmax, ymin, ymax
    cdef long long ia, ib, ic
    cdef double ax, ay, bx, by, qx, qy, za, zb, zc, area, tmp
    cdef double w0, w1, w2, zz
    cdef bint tl0, tl1, tl2
    with nogil:
        for t in range(nt):
            ia = tr[t, 0]
            ib = tr[t, 1]
            ic = tr[t, 2]
            za = vt[ia, 2]
            zb = vt[ib, 2]
            zc = vt[ic, 2]
            if za <= _NEAR or zb <= _NEAR or zc <= _NEAR:
                continue
            ax = fx * vt[ia, 0] / za + cx
            ay = fy * vt[ia, 1] / za + cy
            bx = fx * vt[ib, 0] / zb + cx
            by = fy * vt[ib, 1] / zb + cy
            qx = fx * vt[ic, 0] / zc + cx
            qy = fy * vt[ic, 1] / zc + cy
            area = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            if area == 0.0:
                continue
            if area < 0.0:
                tmp = bx; bx = qx; qx = tmp
                tmp = by; by = qy; qy = tmp
                tmp = zb; zb = zc; zc = tmp
                area = -area
            xmin = <int>ceil(_clampd(min(ax, min(bx, qx)), 0.0, width))
            xmax = <int>floor(_clampd(max(ax, max(bx, qx)), -1.0, width - 1.0))
            ymin = <int>ceil(_clampd(min(ay, min(by, qy)), 0.0, height))
            ymax = <int>floor(_clampd(max(ay, max(by, qy)), -1.0, height - 1.0))
            tl0 = _top_left(bx, by, qx, qy)
            tl1 = _top_left(qx, qy, ax, ay)
            tl2 = _top_left(ax, ay, bx, by)
            for y in range(ymin, ymax + 1):
                for x in range(xmin, xmax + 1):
                    w0 = (qx - bx) * (y - by) - (qy - by) * (x - bx)
                    if not _covers(w0, tl0):
                        continue
                    w1 = (ax - qx) * (y - qy) - (ay - qy) * (x - qx)
                    if not _covers(w1, tl1):
                        continue
                    w2 = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
                    if not _covers(w2, tl2):
                        continue
                    if za == zb and zb == zc:
                        zz = za
                    else:
                        zz = 1.0 / ((w0 / za + w1 / zb + w2 / zc) / area)
                    if zz < dep[y, x]:
                        dep[y, x] = zz
        for y in range(height):
            for x in range(width):
                if dep[y, x] == INFINITY:
                    dep[y, x] = 0.0
    return depth


def score_depth(values, labels, coverage, depth):
    cdef const double[:, :, ::1] val = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] lab = np.ascontiguousarray(labels, dtype=np.float64)
    cdef const cnp.npy_bool[:, ::1] cov = np.ascontiguousarray(coverage, dtype=bool)
    cdef const double[:, ::1] dep = np.ascontiguousarray(depth, dtype=np.float64)
    cdef int h = dep.shape[0], w = dep.shape[1], nl = lab.shape[0]
    cdef int i, j, lo, hi, mid
    cdef long count = 0
    cdef double total = 0.0, z, t
    with nogil:
        for i in range(h):
            for j in range(w):
                z = dep[i, j]
                if not cov[i, j] or not (z > 0) or z < lab[0] or z > lab[nl - 1]:
                    continue
                # largest n with lab[n] <= z, clipped to nl - 2
                lo = 0
                hi = nl - 1
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if lab[mid] <= z:
                        lo = mid
                    else:
                        hi = mid
                t = (z - lab[lo]) / (lab[lo + 1] - lab[lo])
                total = total + ((1.0 - t) * val[i, j, lo] + t * val[i, j, lo + 1])
                count += 1
    return float(total), int(count)


def truncate_profiles(values, int n_lm, int k_lm):
    cdef const double[:, ::1] pr = np.ascontiguousarray(values, dtype=np.float64)
    cdef int p = pr.shape[0], nl = pr.shape[1]
    out = np.zeros((p, nl))
    cdef double[:, ::1] o = out
    chosen_arr = np.empty(max(n_lm, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] chosen = chosen_arr
    cdef int r, l, k, n_chosen, best, lo, hi, q
    cdef double bestv, x
    cdef bint is_max, taken
    with nogil:
        for r in range(p):
            n_chosen = 0
            while n_chosen < n_lm:
                best = -1
                bestv = 0.0
                for l in range(nl):
                    x = pr[r, l]
                    is_max = (l == 0 or x > pr[r, l - 1]) and (l == nl - 1 or x > pr[r, l + 1])
                    if not is_max:
                        continue
                    taken = False
                    for k in range(n_chosen):
                        if chosen[k] == l:
                            taken = True
                            break
                    if taken:
                        continue
                    if best < 0 or x > bestv:
                        best = l
                        bestv = x
                if best < 0:
                    break
                chosen[n_chosen] = best
                n_chosen += 1
            for k in range(n_chosen):
                lo = <int>chosen[k] - k_lm
                hi = <int>chosen[k] + k_lm
                if lo < 0:
                    lo = 0
                if hi > nl - 1:
                    hi = nl - 1
                for q in range(lo, hi + 1):
                    o[r, q] = pr[r, q]
    return out
