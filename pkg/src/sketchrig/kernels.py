"""Hot pixel kernels: triangle painting, sprite blitting, inpaint fill, mask sweep.

Every public function dispatches between a numba ``@njit`` loop and a pure
numpy implementation according to :mod:`sketchrig.accel`.  Both paths
produce bit-identical output (asserted by tests and exercised by
``benchmarks/bench_kernels.py``).

Rasterization rule: a pixel is painted when its center (ix+0.5, iy+0.5)
lies inside the triangle (inclusive edges).  Texture lookup is nearest
texel at the barycentrically interpolated source coordinate, so an
undeformed mesh whose vertices equal its texel grid reproduces the texture
exactly.  Compositing is source-over with straight alpha.
"""

import numpy as np

from . import accel


# ---------------------------------------------------------------------------
# loop bodies (compiled by numba when enabled)


def _paint_triangles_loop(out, verts, tris, order, uvpx, tex):
    h, w = out.shape[0], out.shape[1]
    th, tw = tex.shape[0], tex.shape[1]
    for oi in range(order.shape[0]):
        t = order[oi]
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = verts[i0, 0], verts[i0, 1]
        x1, y1 = verts[i1, 0], verts[i1, 1]
        x2, y2 = verts[i2, 0], verts[i2, 1]
        den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        if den == 0.0:
            continue
        xmin = int(np.floor(min(x0, min(x1, x2)) - 0.5))
        xmax = int(np.ceil(max(x0, max(x1, x2)) - 0.5))
        ymin = int(np.floor(min(y0, min(y1, y2)) - 0.5))
        ymax = int(np.ceil(max(y0, max(y1, y2)) - 0.5))
        if xmin < 0:
            xmin = 0
        if ymin < 0:
            ymin = 0
        if xmax > w - 1:
            xmax = w - 1
        if ymax > h - 1:
            ymax = h - 1
        u0x, u0y = uvpx[i0, 0], uvpx[i0, 1]
        u1x, u1y = uvpx[i1, 0], uvpx[i1, 1]
        u2x, u2y = uvpx[i2, 0], uvpx[i2, 1]
        for iy in range(ymin, ymax + 1):
            py = iy + 0.5
            for ix in range(xmin, xmax + 1):
                px = ix + 0.5
                l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / den
                l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / den
                l2 = 1.0 - l0 - l1
                if l0 < -1e-9 or l1 < -1e-9 or l2 < -1e-9:
                    continue
                sx = l0 * u0x + l1 * u1x + l2 * u2x
                sy = l0 * u0y + l1 * u1y + l2 * u2y
                tx = int(np.floor(sx))
                ty = int(np.floor(sy))
                if tx < 0:
                    tx = 0
                if ty < 0:
                    ty = 0
                if tx > tw - 1:
                    tx = tw - 1
                if ty > th - 1:
                    ty = th - 1
                sa = tex[ty, tx, 3]
                if sa == 0:
                    continue
                if sa == 255:
                    for c in range(4):
                        out[iy, ix, c] = tex[ty, tx, c]
                else:
                    da = out[iy, ix, 3]
                    fa = sa + da * (255 - sa) // 255
                    if fa == 0:
                        continue
                    for c in range(3):
                        sc = tex[ty, tx, c]
                        dc = out[iy, ix, c]
                        num = sc * sa * 255 + dc * da * (255 - sa)
                        out[iy, ix, c] = min(255, (num + fa * 127) // (fa * 255))
                    out[iy, ix, 3] = fa


def _coverage_loop(cov, verts, tris, order):
    h, w = cov.shape[0], cov.shape[1]
    for oi in range(order.shape[0]):
        t = order[oi]
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = verts[i0, 0], verts[i0, 1]
        x1, y1 = verts[i1, 0], verts[i1, 1]
        x2, y2 = verts[i2, 0], verts[i2, 1]
        den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        if den == 0.0:
            continue
        xmin = max(0, int(np.floor(min(x0, min(x1, x2)) - 0.5)))
        xmax = min(w - 1, int(np.ceil(max(x0, max(x1, x2)) - 0.5)))
        ymin = max(0, int(np.floor(min(y0, min(y1, y2)) - 0.5)))
        ymax = min(h - 1, int(np.ceil(max(y0, max(y1, y2)) - 0.5)))
        for iy in range(ymin, ymax + 1):
            py = iy + 0.5
            for ix in range(xmin, xmax + 1):
                px = ix + 0.5
                l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / den
                l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / den
                l2 = 1.0 - l0 - l1
                if l0 >= -1e-9 and l1 >= -1e-9 and l2 >= -1e-9:
                    cov[iy, ix] = True


def _blit_sprite_loop(out, sprite, inv, ox0, oy0, ox1, oy1, clip, use_clip):
    sh, sw = sprite.shape[0], sprite.shape[1]
    a, b, tx = inv[0, 0], inv[0, 1], inv[0, 2]
    c, d, ty = inv[1, 0], inv[1, 1], inv[1, 2]
    for iy in range(oy0, oy1):
        py = iy + 0.5
        for ix in range(ox0, ox1):
            if use_clip and not clip[iy, ix]:
                continue
            px = ix + 0.5
            sx = a * px + b * py + tx
            sy = c * px + d * py + ty
            jx = int(np.floor(sx))
            jy = int(np.floor(sy))
            if jx < 0 or jy < 0 or jx >= sw or jy >= sh:
                continue
            sa = sprite[jy, jx, 3]
            if sa == 0:
                continue
            if sa == 255:
                for ch in range(4):
                    out[iy, ix, ch] = sprite[jy, jx, ch]
            else:
                da = out[iy, ix, 3]
                fa = sa + da * (255 - sa) // 255
                if fa == 0:
                    continue
                for ch in range(3):
                    sc = sprite[jy, jx, ch]
                    dc = out[iy, ix, ch]
                    num = sc * sa * 255 + dc * da * (255 - sa)
                    out[iy, ix, ch] = min(255, (num + fa * 127) // (fa * 255))
                out[iy, ix, 3] = fa


def _inpaint_loop(img, known, ys, xs):
    h, w = known.shape[0], known.shape[1]
    for k in range(ys.shape[0]):
        y = ys[k]
        x = xs[k]
        acc0 = 0.0
        acc1 = 0.0
        acc2 = 0.0
        acc3 = 0.0
        wsum = 0.0
        for dy in range(-1, 2):
            ny = y + dy
            if ny < 0 or ny >= h:
                continue
            for dx in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                nx = x + dx
                if nx < 0 or nx >= w:
                    continue
                if not known[ny, nx]:
                    continue
                wgt = 1.0 if dx * dy == 0 else 0.7071067811865475
                acc0 += wgt * img[ny, nx, 0]
                acc1 += wgt * img[ny, nx, 1]
                acc2 += wgt * img[ny, nx, 2]
                acc3 += wgt * img[ny, nx, 3]
                wsum += wgt
        if wsum > 0.0:
            img[y, x, 0] = acc0 / wsum
            img[y, x, 1] = acc1 / wsum
            img[y, x, 2] = acc2 / wsum
            img[y, x, 3] = acc3 / wsum
            known[y, x] = True


def _sweep_loop(pys, pxs, blocked, sx, sy, max_shift):
    h, w = blocked.shape[0], blocked.shape[1]
    for s in range(0, max_shift + 1):
        ox = s * sx
        oy = s * sy
        for k in range(pys.shape[0]):
            ty = pys[k] + oy
            tx = pxs[k] + ox
            if tx < 0 or tx >= w or ty < 0 or ty >= h:
                return s
            if blocked[ty, tx]:
                return s
    return -1


_compiled = {}


def _jit(fn):
    if fn not in _compiled:
        from numba import njit

        _compiled[fn] = njit(cache=True)(fn)
    return _compiled[fn]


# ---------------------------------------------------------------------------
# numpy fallbacks


def _paint_triangles_numpy(out, verts, tris, order, uvpx, tex):
    h, w = out.shape[:2]
    th, tw = tex.shape[:2]
    for t in order:
        i0, i1, i2 = tris[t]
        p0, p1, p2 = verts[i0], verts[i1], verts[i2]
        den = (p1[1] - p2[1]) * (p0[0] - p2[0]) + (p2[0] - p1[0]) * (p0[1] - p2[1])
        if den == 0.0:
            continue
        xs = verts[[i0, i1, i2], 0]
        ys = verts[[i0, i1, i2], 1]
        xmin = max(0, int(np.floor(xs.min() - 0.5)))
        xmax = min(w - 1, int(np.ceil(xs.max() - 0.5)))
        ymin = max(0, int(np.floor(ys.min() - 0.5)))
        ymax = min(h - 1, int(np.ceil(ys.max() - 0.5)))
        if xmin > xmax or ymin > ymax:
            continue
        gy, gx = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
        px = gx + 0.5
        py = gy + 0.5
        l0 = ((p1[1] - p2[1]) * (px - p2[0]) + (p2[0] - p1[0]) * (py - p2[1])) / den
        l1 = ((p2[1] - p0[1]) * (px - p2[0]) + (p0[0] - p2[0]) * (py - p2[1])) / den
        l2 = 1.0 - l0 - l1
        inside = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9)
        if not inside.any():
            continue
        su = l0 * uvpx[i0, 0] + l1 * uvpx[i1, 0] + l2 * uvpx[i2, 0]
        sv = l0 * uvpx[i0, 1] + l1 * uvpx[i1, 1] + l2 * uvpx[i2, 1]
        txs = np.clip(np.floor(su).astype(np.int64), 0, tw - 1)
        tys = np.clip(np.floor(sv).astype(np.int64), 0, th - 1)
        src = tex[tys, txs].astype(np.int64)
        iyv = gy[inside]
        ixv = gx[inside]
        src = src[inside]
        dst = out[iyv, ixv].astype(np.int64)
        sa = src[:, 3]
        da = dst[:, 3]
        fa = sa + da * (255 - sa) // 255
        res = dst.copy()
        nz = fa > 0
        for ch in range(3):
            num = src[:, ch] * sa * 255 + dst[:, ch] * da * (255 - sa)
            val = np.zeros_like(num)
            val[nz] = np.minimum(255, (num[nz] + fa[nz] * 127) // (fa[nz] * 255))
            res[:, ch] = np.where(nz, val, dst[:, ch])
        res[:, 3] = fa
        opaque = sa == 255
        res[opaque] = src[opaque]
        zero = sa == 0
        res[zero] = dst[zero]
        out[iyv, ixv] = res.astype(np.uint8)


def _coverage_numpy(cov, verts, tris, order):
    h, w = cov.shape
    for t in order:
        i0, i1, i2 = tris[t]
        p0, p1, p2 = verts[i0], verts[i1], verts[i2]
        den = (p1[1] - p2[1]) * (p0[0] - p2[0]) + (p2[0] - p1[0]) * (p0[1] - p2[1])
        if den == 0.0:
            continue
        xs = verts[[i0, i1, i2], 0]
        ys = verts[[i0, i1, i2], 1]
        xmin = max(0, int(np.floor(xs.min() - 0.5)))
        xmax = min(w - 1, int(np.ceil(xs.max() - 0.5)))
        ymin = max(0, int(np.floor(ys.min() - 0.5)))
        ymax = min(h - 1, int(np.ceil(ys.max() - 0.5)))
        if xmin > xmax or ymin > ymax:
            continue
        gy, gx = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
        px = gx + 0.5
        py = gy + 0.5
        l0 = ((p1[1] - p2[1]) * (px - p2[0]) + (p2[0] - p1[0]) * (py - p2[1])) / den
        l1 = ((p2[1] - p0[1]) * (px - p2[0]) + (p0[0] - p2[0]) * (py - p2[1])) / den
        l2 = 1.0 - l0 - l1
        inside = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9)
        cov[ymin : ymax + 1, xmin : xmax + 1] |= inside


def _blit_sprite_numpy(out, sprite, inv, ox0, oy0, ox1, oy1, clip, use_clip):
    sh, sw = sprite.shape[:2]
    if ox0 >= ox1 or oy0 >= oy1:
        return
    gy, gx = np.mgrid[oy0:oy1, ox0:ox1]
    px = gx + 0.5
    py = gy + 0.5
    sx = inv[0, 0] * px + inv[0, 1] * py + inv[0, 2]
    sy = inv[1, 0] * px + inv[1, 1] * py + inv[1, 2]
    jx = np.floor(sx).astype(np.int64)
    jy = np.floor(sy).astype(np.int64)
    valid = (jx >= 0) & (jy >= 0) & (jx < sw) & (jy < sh)
    if use_clip:
        valid &= clip[oy0:oy1, ox0:ox1]
    if not valid.any():
        return
    jxv = jx[valid]
    jyv = jy[valid]
    src = sprite[jyv, jxv].astype(np.int64)
    iyv = gy[valid]
    ixv = gx[valid]
    dst = out[iyv, ixv].astype(np.int64)
    sa = src[:, 3]
    da = dst[:, 3]
    fa = sa + da * (255 - sa) // 255
    res = dst.copy()
    nz = fa > 0
    for ch in range(3):
        num = src[:, ch] * sa * 255 + dst[:, ch] * da * (255 - sa)
        val = np.zeros_like(num)
        val[nz] = np.minimum(255, (num[nz] + fa[nz] * 127) // (fa[nz] * 255))
        res[:, ch] = np.where(nz, val, dst[:, ch])
    res[:, 3] = fa
    opaque = sa == 255
    res[opaque] = src[opaque]
    zero = sa == 0
    res[zero] = dst[zero]
    out[iyv, ixv] = res.astype(np.uint8)


def _inpaint_numpy(img, known, ys, xs):
    h, w = known.shape
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    weights = [0.7071067811865475, 1.0, 0.7071067811865475, 1.0, 1.0,
               0.7071067811865475, 1.0, 0.7071067811865475]
    for y, x in zip(ys, xs):
        acc = np.zeros(4)
        wsum = 0.0
        for (dy, dx), wgt in zip(offsets, weights):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and known[ny, nx]:
                acc += wgt * img[ny, nx]
                wsum += wgt
        if wsum > 0.0:
            img[y, x] = acc / wsum
            known[y, x] = True


def _sweep_numpy(part, blocked, sx, sy, max_shift):
    h, w = part.shape
    pys, pxs = np.nonzero(part)
    for s in range(0, max_shift + 1):
        tx = pxs + s * sx
        ty = pys + s * sy
        off = (tx < 0) | (tx >= w) | (ty < 0) | (ty >= h)
        if off.any():
            return s
        if blocked[ty, tx].any():
            return s
    return -1


# ---------------------------------------------------------------------------
# public dispatchers


def paint_triangles(out, verts, tris, order, uvpx, tex):
    """Paint ``tris[order]`` onto ``out`` (uint8 RGBA), sampling ``tex`` at
    the interpolated ``uvpx`` texel coordinates (nearest texel, source-over)."""
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    uvpx = np.ascontiguousarray(uvpx, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    if accel.use_numba():
        _jit(_paint_triangles_loop)(out, verts, tris, order, uvpx, tex)
    else:
        _paint_triangles_numpy(out, verts, tris, order, uvpx, tex)


def rasterize_coverage(shape, verts, tris, order=None):
    """Boolean coverage mask of the given triangles (pixel-center rule)."""
    cov = np.zeros(shape, dtype=bool)
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    if order is None:
        order = np.arange(len(tris), dtype=np.int64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    if accel.use_numba():
        _jit(_coverage_loop)(cov, verts, tris, order)
    else:
        _coverage_numpy(cov, verts, tris, order)
    return cov


def blit_sprite(out, sprite, transform, clip=None):
    """Draw ``sprite`` (uint8 RGBA) transformed by the 3x3 ``transform``
    (sprite -> canvas, pixel coords) onto ``out``; optional boolean clip."""
    inv = np.linalg.inv(np.asarray(transform, dtype=np.float64))[:2, :]
    h, w = out.shape[:2]
    sh, sw = sprite.shape[:2]
    corners = np.array([[0, 0, 1], [sw, 0, 1], [0, sh, 1], [sw, sh, 1]], dtype=np.float64)
    mapped = corners @ np.asarray(transform, dtype=np.float64).T
    ox0 = max(0, int(np.floor(mapped[:, 0].min())))
    oy0 = max(0, int(np.floor(mapped[:, 1].min())))
    ox1 = min(w, int(np.ceil(mapped[:, 0].max())))
    oy1 = min(h, int(np.ceil(mapped[:, 1].max())))
    use_clip = clip is not None
    clip_arr = clip if use_clip else np.zeros((1, 1), dtype=bool)
    inv = np.ascontiguousarray(inv)
    if accel.use_numba():
        _jit(_blit_sprite_loop)(out, sprite, inv, ox0, oy0, ox1, oy1, clip_arr, use_clip)
    else:
        _blit_sprite_numpy(out, sprite, inv, ox0, oy0, ox1, oy1, clip_arr, use_clip)


def inpaint_fill(img, known, ys, xs):
    """Fill pixels (ys, xs) in order from known 8-neighbors (in-place).

    ``img`` is float64 (H, W, 4); ``known`` bool, updated as pixels fill.
    """
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    if accel.use_numba():
        _jit(_inpaint_loop)(img, known, ys, xs)
    else:
        _inpaint_numpy(img, known, ys, xs)


def first_contact_shift(part, blocked, step, max_shift):
    """Smallest shift s in [0, max_shift] (in whole steps of ``step``) at
    which the shifted part mask hits a blocked pixel or leaves the canvas;
    -1 when it never does."""
    part = np.ascontiguousarray(part, dtype=np.bool_)
    blocked = np.ascontiguousarray(blocked, dtype=np.bool_)
    sx, sy = int(step[0]), int(step[1])
    if accel.use_numba():
        pys, pxs = np.nonzero(part)
        return int(_jit(_sweep_loop)(
            np.ascontiguousarray(pys), np.ascontiguousarray(pxs),
            blocked, sx, sy, int(max_shift)))
    return int(_sweep_numpy(part, blocked, sx, sy, int(max_shift)))
