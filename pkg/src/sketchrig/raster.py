"""Pixel- and mesh-level geometry: mirroring, contours, triangulation,
inpainting, foot stitching.

Masks are bool ``(H, W)`` arrays, images uint8 ``(H, W, 4)`` straight-alpha
RGBA.  Contour vertices live on the half-integer lattice between pixel
centers; pixel (i, j) has its center at (i + 0.5, j + 0.5).

Orientation convention: loops are reported with the foreground on the left
of the direction of travel.  In image coordinates (y down) that makes outer
loops counter-clockwise on screen, which is a *negative* signed area under
the usual shoelace formula; hole loops come out clockwise on screen
(positive shoelace).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, QhullError

from .errors import (
    BoundsError,
    EmptyMaskError,
    GeometryError,
    InsufficientContextError,
    MultiComponentError,
)


@dataclass
class TexturedMesh:
    """A 2D triangle mesh in image coordinates.

    ``uv`` holds per-vertex texel coordinates (pixels, not normalized).
    ``triangle_joint`` is filled by the rig builder.
    """

    vertices: np.ndarray          # (N, 2) float64
    triangles: np.ndarray         # (M, 3) int32
    uv: np.ndarray                # (N, 2) float64
    triangle_joint: list = field(default=None)

    def copy(self):
        return TexturedMesh(
            self.vertices.copy(),
            self.triangles.copy(),
            self.uv.copy(),
            None if self.triangle_joint is None else list(self.triangle_joint),
        )


def signed_area(loop):
    """Shoelace signed area; negative for screen-CCW loops in y-down coords."""
    x = loop[:, 0]
    y = loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def triangle_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * np.abs(
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


# ---------------------------------------------------------------------------
# mirroring


def mirror_horizontal(mask, image, axis_x):
    """Reflect the masked content about the vertical line x = axis_x.

    Only pixels inside the input mask are transferred; everything else in
    the returned image is transparent, so mirroring twice about the same
    axis is a bit-exact involution on (mask, masked content).
    """
    h, w = mask.shape
    ax2 = int(round(2.0 * float(axis_x)))
    ys, xs = np.nonzero(mask)
    out_mask = np.zeros_like(mask)
    out_image = np.zeros_like(image)
    if len(xs) == 0:
        return out_mask, out_image
    mx = ax2 - xs
    if mx.min() < 0 or mx.max() >= w:
        raise BoundsError(
            f"mirror about x={axis_x} leaves the {w}-wide canvas; pad first"
        )
    out_mask[ys, mx] = True
    out_image[ys, mx] = image[ys, xs]
    return out_mask, out_image


def mask_bbox(mask):
    """(x0, y0, x1, y1) inclusive bounds of the foreground, or None."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


# ---------------------------------------------------------------------------
# marching squares

# Each cell is a 2x2 block of pixel centers; bits a,b,c,d = TL,TR,BR,BL.
# Segments run through edge midpoints T,R,B,L with foreground on the left.
# Saddles (codes 5 and 10) split so the foreground stays 4-connected and
# the background 8-connected.
_T, _R, _B, _L = 0, 1, 2, 3
_CASES = {
    1: [(_L, _T)],
    2: [(_T, _R)],
    3: [(_L, _R)],
    4: [(_R, _B)],
    5: [(_L, _T), (_R, _B)],
    6: [(_T, _B)],
    7: [(_L, _B)],
    8: [(_B, _L)],
    9: [(_B, _T)],
    10: [(_T, _R), (_B, _L)],
    11: [(_B, _R)],
    12: [(_R, _L)],
    13: [(_R, _T)],
    14: [(_T, _L)],
}


def extract_contour(mask):
    """Trace the 0.5-isocontour of a single-component mask.

    Returns ``(outer, holes)``: the outer loop plus any interior hole
    loops, each an (K, 2) float array of half-integer vertices.  The last
    vertex is not repeated.
    """
    if not mask.any():
        raise EmptyMaskError("cannot extract a contour from an empty mask")
    _, ncomp = ndimage.label(mask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if ncomp != 1:
        raise MultiComponentError(f"mask has {ncomp} 4-connected components")

    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    a = padded[:-1, :-1]
    b = padded[:-1, 1:]
    c = padded[1:, 1:]
    d = padded[1:, :-1]
    codes = (
        a.astype(np.uint8)
        + 2 * b.astype(np.uint8)
        + 4 * c.astype(np.uint8)
        + 8 * d.astype(np.uint8)
    )
    cys, cxs = np.nonzero((codes != 0) & (codes != 15))

    # Midpoints in doubled coordinates so dictionary keys stay integral.
    # Cell (cx, cy) in padded space has its TL pixel center at
    # (cx - 0.5, cy - 0.5) in mask space; doubled: (2cx - 1, 2cy - 1).
    succ = {}
    for cy, cx in zip(cys, cxs):
        bx = 2 * int(cx) - 1
        by = 2 * int(cy) - 1
        mids = (
            (bx + 1, by),      # T
            (bx + 2, by + 1),  # R
            (bx + 1, by + 2),  # B
            (bx, by + 1),      # L
        )
        for frm, to in _CASES[int(codes[cy, cx])]:
            succ[mids[frm]] = mids[to]

    loops = []
    visited = set()
    for start in sorted(succ):
        if start in visited:
            continue
        chain = [start]
        visited.add(start)
        cur = succ[start]
        while cur != start:
            chain.append(cur)
            visited.add(cur)
            cur = succ[cur]
        loops.append(np.asarray(chain, dtype=np.float64) * 0.5)

    outer = None
    holes = []
    for loop in loops:
        if signed_area(loop) < 0.0:
            if outer is not None:  # pragma: no cover - excluded by label check
                raise MultiComponentError("multiple outer loops traced")
            outer = loop
        else:
            holes.append(loop)
    if outer is None:  # pragma: no cover
        raise GeometryError("no outer loop found")
    return outer, holes


def simplify_polyline(loop, tolerance):
    """Douglas-Peucker on a closed loop; keeps a subset of the vertices.

    Max deviation from the input polyline is bounded by ``tolerance``;
    0.36px collapses axis-aligned runs and ideal 45-degree staircases from
    marching squares while staying well inside the half-pixel band.
    """
    pts = np.asarray(loop, dtype=np.float64)
    n = len(pts)
    if n <= 4 or tolerance <= 0:
        return pts.copy()
    far = int(np.argmax(np.linalg.norm(pts - pts[0], axis=1)))
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[far] = True

    def dp(i0, i1):
        stack = [(i0, i1)]
        while stack:
            a, b = stack.pop()
            if b - a < 2:
                continue
            seg = pts[b] - pts[a]
            ln = np.hypot(seg[0], seg[1])
            mid = pts[a + 1 : b]
            if ln == 0:
                d = np.linalg.norm(mid - pts[a], axis=1)
            else:
                d = np.abs(
                    (mid[:, 0] - pts[a][0]) * seg[1] - (mid[:, 1] - pts[a][1]) * seg[0]
                ) / ln
            k = int(np.argmax(d))
            if d[k] > tolerance:
                keep[a + 1 + k] = True
                stack.append((a, a + 1 + k))
                stack.append((a + 1 + k, b))

    dp(0, far)
    # second half wraps around: rotate so it is contiguous
    rolled = np.concatenate([pts[far:], pts[: far + 1]], axis=0)
    keep2 = np.zeros(len(rolled), dtype=bool)

    def dp2(a_, b_):
        stack = [(a_, b_)]
        while stack:
            a, b = stack.pop()
            if b - a < 2:
                continue
            seg = rolled[b] - rolled[a]
            ln = np.hypot(seg[0], seg[1])
            mid = rolled[a + 1 : b]
            if ln == 0:
                d = np.linalg.norm(mid - rolled[a], axis=1)
            else:
                d = np.abs(
                    (mid[:, 0] - rolled[a][0]) * seg[1]
                    - (mid[:, 1] - rolled[a][1]) * seg[0]
                ) / ln
            k = int(np.argmax(d))
            if d[k] > tolerance:
                keep2[a + 1 + k] = True
                stack.append((a, a + 1 + k))
                stack.append((a + 1 + k, b))

    dp2(0, len(rolled) - 1)
    for j in np.nonzero(keep2)[0]:
        keep[(far + j) % n] = True
    out = pts[keep]
    return out if len(out) >= 3 else pts.copy()


def rasterize_polygon(shape, loops):
    """Even-odd scanline fill of the given loops; pixel-center rule."""
    h, w = shape
    out = np.zeros(shape, dtype=bool)
    edges = []
    for loop in loops:
        pts = np.asarray(loop, dtype=np.float64)
        nxt = np.roll(pts, -1, axis=0)
        keep = pts[:, 1] != nxt[:, 1]
        edges.append(np.concatenate([pts[keep], nxt[keep]], axis=1))
    if not edges:
        return out
    e = np.concatenate(edges, axis=0)  # x1 y1 x2 y2
    x1, y1, x2, y2 = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    ymin = np.minimum(y1, y2)
    ymax = np.maximum(y1, y2)
    for iy in range(h):
        py = iy + 0.5
        sel = (ymin <= py) & (py < ymax)
        if not sel.any():
            continue
        t = (py - y1[sel]) / (y2[sel] - y1[sel])
        xs = np.sort(x1[sel] + t * (x2[sel] - x1[sel]))
        for k in range(0, len(xs) - 1, 2):
            lo = int(np.ceil(xs[k] - 0.5))
            hi = int(np.floor(xs[k + 1] - 0.5 - 1e-12))
            if hi >= lo:
                out[iy, max(0, lo) : min(w, hi + 1)] = True
    return out


# ---------------------------------------------------------------------------
# constrained Delaunay triangulation


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _proper_cross(p1, p2, p3, p4):
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and (d3 > 0) != (d4 > 0) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def _check_simple(loops):
    segs = []
    for loop in loops:
        pts = np.asarray(loop, dtype=np.float64)
        if len(pts) < 3:
            raise GeometryError("loop needs at least 3 vertices")
        segs.append(np.concatenate([pts, np.roll(pts, -1, axis=0)], axis=1))
    s = np.concatenate(segs, axis=0)
    n = len(s)
    for i0 in range(0, n, 256):
        chunk = s[i0 : i0 + 256]
        a1 = chunk[:, None, 0:2]
        a2 = chunk[:, None, 2:4]
        b1 = s[None, :, 0:2]
        b2 = s[None, :, 2:4]
        d1 = (a2[..., 0] - a1[..., 0]) * (b1[..., 1] - a1[..., 1]) - (
            a2[..., 1] - a1[..., 1]
        ) * (b1[..., 0] - a1[..., 0])
        d2 = (a2[..., 0] - a1[..., 0]) * (b2[..., 1] - a1[..., 1]) - (
            a2[..., 1] - a1[..., 1]
        ) * (b2[..., 0] - a1[..., 0])
        d3 = (b2[..., 0] - b1[..., 0]) * (a1[..., 1] - b1[..., 1]) - (
            b2[..., 1] - b1[..., 1]
        ) * (a1[..., 0] - b1[..., 0])
        d4 = (b2[..., 0] - b1[..., 0]) * (a2[..., 1] - b1[..., 1]) - (
            b2[..., 1] - b1[..., 1]
        ) * (a2[..., 0] - b1[..., 0])
        crossing = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0))
        crossing &= (d1 != 0) & (d2 != 0) & (d3 != 0) & (d4 != 0)
        if crossing.any():
            raise GeometryError("self-intersecting input loops")


def _point_in_loops(points, loops):
    """Even-odd inside test for many points against all loops combined."""
    inside = np.zeros(len(points), dtype=bool)
    px = points[:, 0]
    py = points[:, 1]
    for loop in loops:
        pts = np.asarray(loop, dtype=np.float64)
        x1 = pts[:, 0]
        y1 = pts[:, 1]
        x2 = np.roll(x1, -1)
        y2 = np.roll(y1, -1)
        for k in range(len(pts)):
            if y1[k] == y2[k]:
                continue
            cond = (np.minimum(y1[k], y2[k]) <= py) & (py < np.maximum(y1[k], y2[k]))
            t = (py - y1[k]) / (y2[k] - y1[k])
            cx = x1[k] + t * (x2[k] - x1[k])
            inside ^= cond & (cx > px)
    return inside


def _subdivide_loop(loop, hmax):
    out = []
    n = len(loop)
    for i in range(n):
        p = loop[i]
        q = loop[(i + 1) % n]
        out.append(p)
        d = float(np.hypot(q[0] - p[0], q[1] - p[1]))
        if d > hmax:
            pieces = int(np.ceil(d / hmax))
            for k in range(1, pieces):
                out.append(p + (q - p) * (k / pieces))
    return np.asarray(out, dtype=np.float64)


def _edge_key(i, j):
    return (i, j) if i < j else (j, i)


def _triangulate_pseudo(poly, points, out):
    """Anglada-style retriangulation of a pseudo-polygon (Delaunay criterion)."""
    if len(poly) < 3:
        return
    if len(poly) == 3:
        out.append((poly[0], poly[1], poly[2]))
        return
    a = poly[0]
    b = poly[-1]
    best = 1
    best_cos = 2.0
    pa = points[a]
    pb = points[b]
    for k in range(1, len(poly) - 1):
        pc = points[poly[k]]
        va = pa - pc
        vb = pb - pc
        denom = np.hypot(*va) * np.hypot(*vb)
        cosv = float(np.dot(va, vb) / denom) if denom > 0 else 1.0
        if cosv < best_cos:
            best_cos = cosv
            best = k
    out.append((a, poly[best], b))
    _triangulate_pseudo(poly[: best + 1], points, out)
    _triangulate_pseudo(poly[best:], points, out)


def _enforce_constraints(points, tris, constraints):
    """Insert missing constraint edges by cavity retriangulation."""
    tri_set = {tuple(sorted(t)) for t in tris}

    def edges_of(t):
        return [_edge_key(t[0], t[1]), _edge_key(t[1], t[2]), _edge_key(t[2], t[0])]

    edge_set = set()
    for t in tri_set:
        edge_set.update(edges_of(t))

    pending = [tuple(c) for c in constraints]
    guard = 0
    while pending:
        guard += 1
        if guard > 100000:  # pragma: no cover
            raise GeometryError("constraint enforcement did not converge")
        ia, ib = pending.pop()
        if _edge_key(ia, ib) in edge_set:
            continue
        pa = points[ia]
        pb = points[ib]
        # vertex exactly on the open segment: split the constraint
        split_at = None
        for t in tri_set:
            for v in t:
                if v == ia or v == ib:
                    continue
                pv = points[v]
                if _orient(pa, pb, pv) == 0.0:
                    if (
                        min(pa[0], pb[0]) <= pv[0] <= max(pa[0], pb[0])
                        and min(pa[1], pb[1]) <= pv[1] <= max(pa[1], pb[1])
                        and (pv[0] != pa[0] or pv[1] != pa[1])
                        and (pv[0] != pb[0] or pv[1] != pb[1])
                    ):
                        split_at = v
                        break
            if split_at is not None:
                break
        if split_at is not None:
            pending.append((ia, split_at))
            pending.append((split_at, ib))
            continue

        crossing = []
        for t in tri_set:
            tp = [points[v] for v in t]
            hit = False
            for k in range(3):
                if _proper_cross(pa, pb, tp[k], tp[(k + 1) % 3]):
                    hit = True
                    break
            if hit:
                crossing.append(t)
        if not crossing:
            raise GeometryError(
                f"cannot recover constraint edge {ia}-{ib}; degenerate input?"
            )
        edge_count = {}
        cavity_verts = set()
        for t in crossing:
            cavity_verts.update(t)
            for e in edges_of(t):
                edge_count[e] = edge_count.get(e, 0) + 1
        boundary = [e for e, cnt in edge_count.items() if cnt == 1]
        adj = {}
        for i, j in boundary:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
        # walk the cavity boundary cycle starting at ia
        cycle = [ia]
        prev = None
        cur = ia
        while True:
            nxts = [v for v in adj[cur] if v != prev]
            nxt = nxts[0] if nxts else prev
            prev, cur = cur, nxt
            if cur == ia:
                break
            cycle.append(cur)
            if len(cycle) > len(boundary) + 1:  # pragma: no cover
                raise GeometryError("cavity walk failed")
        if ib not in cycle:  # pragma: no cover
            raise GeometryError("constraint endpoints not on cavity boundary")
        kb = cycle.index(ib)
        side1 = cycle[: kb + 1]
        side2 = [ia] + cycle[: kb - len(cycle) - 1 : -1]
        new_tris = []
        _triangulate_pseudo(side1, points, new_tris)
        _triangulate_pseudo(side2, points, new_tris)
        for t in crossing:
            tri_set.discard(t)
        for e in list(edge_count):
            if edge_count[e] == 2:
                edge_set.discard(e)
        for t in new_tris:
            tt = tuple(sorted(t))
            tri_set.add(tt)
            edge_set.update(edges_of(tt))
        edge_set.add(_edge_key(ia, ib))
    return [list(t) for t in tri_set]


def triangulate(outer, holes=(), max_area=None):
    """Constrained Delaunay triangulation of a polygon with holes.

    Steiner points are added on an interior grid (and by centroid splitting)
    until every triangle's area is at most ``max_area``.  Every input loop
    edge appears as a union of mesh edges.
    """
    loops = [np.asarray(outer, dtype=np.float64)] + [
        np.asarray(h, dtype=np.float64) for h in holes
    ]
    _check_simple(loops)

    if max_area is not None and np.isfinite(max_area):
        if max_area <= 0:
            raise GeometryError("max_area must be positive")
        hstep = float(np.sqrt(max_area))
        loops = [_subdivide_loop(lp, hstep) for lp in loops]
    else:
        hstep = None

    # dedupe vertices while keeping loop connectivity
    index = {}
    pts = []

    def vid(p):
        key = (float(p[0]), float(p[1]))
        if key not in index:
            index[key] = len(pts)
            pts.append(key)
        return index[key]

    constraints = []
    for lp in loops:
        ids = [vid(p) for p in lp]
        n = len(ids)
        for i in range(n):
            a, b = ids[i], ids[(i + 1) % n]
            if a != b:
                constraints.append((a, b))

    seeds = []
    if hstep is not None:
        allpts = np.concatenate(loops, axis=0)
        x0, y0 = allpts.min(axis=0)
        x1, y1 = allpts.max(axis=0)
        gx = np.arange(x0 + 0.5 * hstep, x1, hstep)
        gy = np.arange(y0 + 0.5 * hstep, y1, hstep)
        if len(gx) and len(gy):
            grid = np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)
            inside = _point_in_loops(grid, loops)
            grid = grid[inside]
            if len(grid):
                # keep clear of every constraint segment
                keep = np.ones(len(grid), dtype=bool)
                for lp in loops:
                    p1 = lp
                    p2 = np.roll(lp, -1, axis=0)
                    d = p2 - p1
                    ln2 = (d ** 2).sum(axis=1)
                    ln2[ln2 == 0] = 1.0
                    for i0 in range(0, len(grid), 512):
                        g = grid[i0 : i0 + 512]
                        w = g[:, None, :] - p1[None, :, :]
                        t = np.clip((w * d[None, :, :]).sum(-1) / ln2[None, :], 0, 1)
                        proj = p1[None, :, :] + t[..., None] * d[None, :, :]
                        dist2 = ((g[:, None, :] - proj) ** 2).sum(-1).min(axis=1)
                        keep[i0 : i0 + 512] &= dist2 > (0.45 * hstep) ** 2
                seeds = [tuple(p) for p in grid[keep]]

    extra = list(seeds)
    for _round in range(12):
        all_pts = np.asarray(pts + extra, dtype=np.float64)
        try:
            dt = Delaunay(all_pts)
        except QhullError as exc:
            raise GeometryError(f"triangulation failed: {exc}") from None
        tris = _enforce_constraints(all_pts, dt.simplices.tolist(), constraints)
        tris = np.asarray(tris, dtype=np.int64)
        cents = all_pts[tris].mean(axis=1)
        keep = _point_in_loops(cents, loops)
        tris = tris[keep]
        if hstep is None:
            break
        areas = triangle_areas(all_pts, tris)
        bad = areas > max_area + 1e-9
        if not bad.any():
            break
        for c in cents[bad]:
            extra.append((float(c[0]), float(c[1])))
    else:  # pragma: no cover - refinement loop cap
        raise GeometryError("area refinement did not converge")

    if len(tris) == 0:
        raise GeometryError("triangulation produced no interior triangles")

    # drop unused vertices, orient triangles consistently (positive shoelace)
    used = np.unique(tris)
    remap = -np.ones(len(all_pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = all_pts[used]
    tris = remap[tris]
    p0 = verts[tris[:, 0]]
    p1 = verts[tris[:, 1]]
    p2 = verts[tris[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (
        p1[:, 1] - p0[:, 1]
    )
    flip = cross < 0
    tris[flip] = tris[flip][:, ::-1]
    order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0]))
    tris = tris[order]
    return TexturedMesh(
        vertices=verts,
        triangles=tris.astype(np.int32),
        uv=verts.copy(),
        triangle_joint=None,
    )


def mesh_edge_set(mesh):
    e = set()
    for t in mesh.triangles:
        e.add(_edge_key(int(t[0]), int(t[1])))
        e.add(_edge_key(int(t[1]), int(t[2])))
        e.add(_edge_key(int(t[2]), int(t[0])))
    return e


# ---------------------------------------------------------------------------
# inpainting


def inpaint(image, holes, known=None):
    """Fill ``holes`` deterministically from surrounding known pixels.

    Pixels are processed in increasing distance-to-known order (ties by
    row, then column) and take the distance-weighted average of their
    already-known 8-neighbors, so results are reproducible bit-for-bit and
    each filled channel stays within the convex hull of its sources.

    ``known`` optionally restricts the source region (e.g. to the figure
    mask); by default every non-hole pixel is a source.
    """
    holes = np.asarray(holes, dtype=bool)
    out = image.copy()
    if not holes.any():
        return out
    if known is None:
        known = ~holes
    else:
        known = np.asarray(known, dtype=bool) & ~holes
    if not known.any():
        raise InsufficientContextError("no known pixels to inpaint from")
    dist = ndimage.distance_transform_edt(~known)
    hy, hx = np.nonzero(holes)
    order = np.lexsort((hx, hy, dist[hy, hx]))
    ys = hy[order]
    xs = hx[order]
    from . import kernels

    img_f = image.astype(np.float64)
    kn = known.copy()
    kernels.inpaint_fill(img_f, kn, ys, xs)
    filled = np.clip(np.rint(img_f[holes]), 0, 255).astype(np.uint8)
    out[holes] = filled
    return out


# ---------------------------------------------------------------------------
# foot stitching


def stitch_foot_variant(view_mask, tex_front, tex_back, ankle, knee, side):
    """Mirror the lower-leg-and-foot region in place to flip its sidedness.

    The region starts midway between the ankle and knee keypoints (a
    horizontal cut).  The mirror axis is the vertical line through the
    center of the region's topmost row span (the leg cross-section at the
    cut), so the leg re-stitches seamlessly and applying the operation
    twice restores the original bit-for-bit.  Returns
    ``(mask, front, back)``.
    """
    mid_y = 0.5 * (float(ankle[1]) + float(knee[1]))
    h, w = view_mask.shape
    row_sel = (np.arange(h) + 0.5) >= mid_y
    half = view_mask & row_sel[:, None]
    if not half.any():
        raise GeometryError(f"{side} foot region is empty below the cut line")
    labels, n = ndimage.label(half, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    ys, xs = np.nonzero(half)
    d2 = (xs + 0.5 - float(ankle[0])) ** 2 + (ys + 0.5 - float(ankle[1])) ** 2
    best = np.lexsort((xs, ys, d2))[0]
    region = labels == labels[ys[best], xs[best]]
    top = int(np.nonzero(region.any(axis=1))[0][0])
    top_xs = np.nonzero(region[top])[0]
    ax2 = int(top_xs.min()) + int(top_xs.max())
    if ax2 - int(np.nonzero(region.any(axis=0))[0][-1]) < 0 or ax2 - int(
        np.nonzero(region.any(axis=0))[0][0]
    ) >= w:
        raise BoundsError("mirrored foot region leaves the canvas; pad first")

    rys, rxs = np.nonzero(region)
    mx = ax2 - rxs
    new_mask = view_mask & ~region
    new_mask[rys, mx] = True
    out_front = tex_front.copy()
    out_back = tex_back.copy()
    vacated = region.copy()
    vacated[rys, mx] = False
    out_front[vacated] = 0
    out_back[vacated] = 0
    out_front[rys, mx] = tex_front[rys, rxs]
    out_back[rys, mx] = tex_back[rys, rxs]
    return new_mask, out_front, out_back
