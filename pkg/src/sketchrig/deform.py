"""Handle-driven mesh deformation, part placement, and frame compositing.

The deformation is the registration-based two-pass scheme: a similarity
pass expresses every vertex in the local frame of its triangle edges and
solves one prefactorized sparse least-squares system, then a scale-adjust
pass fits a pure rotation per triangle and solves for positions whose
edges match the rotated rest edges.  Handles (the 15 character keypoints)
enter both passes as soft constraints attached barycentrically, so only
the right-hand side changes per frame.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .errors import RegistrationError
from .motion import CHARACTER_JOINTS

_HANDLE_WEIGHT = 1000.0


@dataclass
class DeformedMesh:
    positions: np.ndarray      # (N, 2) float64
    variant_key: str


@dataclass
class FramePacket:
    """Self-contained render unit for one frame (plus the rig bundle)."""

    frame_index: int
    view_side: str
    variant_key: str
    texture_side: str
    vertices: np.ndarray       # (N, 2) float32-able deformed positions
    placements: dict           # part id -> 3x3 final transform
    render_order: list         # bone labels, farthest first
    plane_origin: np.ndarray   # (3,)
    plane_normal: np.ndarray   # (3,)
    theta: float
    limb_swapped: bool = False


def _locate_point(mesh, point):
    """(triangle index, barycentric) of the triangle containing the point."""
    p = np.asarray(point, dtype=np.float64)
    v = mesh.vertices
    t = mesh.triangles
    p0 = v[t[:, 0]]
    p1 = v[t[:, 1]]
    p2 = v[t[:, 2]]
    den = (p1[:, 1] - p2[:, 1]) * (p0[:, 0] - p2[:, 0]) + (p2[:, 0] - p1[:, 0]) * (
        p0[:, 1] - p2[:, 1]
    )
    den = np.where(den == 0.0, 1e-30, den)
    l0 = ((p1[:, 1] - p2[:, 1]) * (p[0] - p2[:, 0]) + (p2[:, 0] - p1[:, 0]) * (p[1] - p2[:, 1])) / den
    l1 = ((p2[:, 1] - p0[:, 1]) * (p[0] - p2[:, 0]) + (p0[:, 0] - p2[:, 0]) * (p[1] - p2[:, 1])) / den
    l2 = 1.0 - l0 - l1
    worst = np.minimum(np.minimum(l0, l1), l2)
    best = int(np.argmax(worst))
    if worst[best] < -1e-6:
        return None
    bary = np.array([l0[best], l1[best], l2[best]])
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum()
    return best, bary


class ArapSystem:
    """Prefactorized two-pass deformation system for one rest mesh."""

    def __init__(self, mesh, handles):
        self.mesh = mesh
        self.handle_names = list(handles)
        nverts = len(mesh.vertices)
        tris = mesh.triangles
        verts = mesh.vertices

        attach_rows = []
        attach_cols = []
        attach_vals = []
        self.attachments = {}
        for hi, name in enumerate(self.handle_names):
            hit = _locate_point(mesh, handles[name])
            if hit is None:
                raise RegistrationError(f"handle '{name}' lies outside the mesh")
            ti, bary = hit
            self.attachments[name] = (ti, bary)
            for k in range(3):
                attach_rows.append(hi)
                attach_cols.append(int(tris[ti, k]))
                attach_vals.append(float(bary[k]))
        nh = len(self.handle_names)
        B = coo_matrix((attach_vals, (attach_rows, attach_cols)), shape=(nh, nverts)).tocsr()

        # similarity pass: one residual per triangle per vertex rotation
        rows, cols, vals = [], [], []
        row = 0
        rest_xy = []
        for t in range(len(tris)):
            for rot in range(3):
                ia = int(tris[t, rot])
                ib = int(tris[t, (rot + 1) % 3])
                ic = int(tris[t, (rot + 2) % 3])
                e = verts[ib] - verts[ia]
                f = verts[ic] - verts[ia]
                L2 = float(e @ e)
                if L2 == 0.0:
                    continue
                x = float(f @ e) / L2
                y = float(f[0] * e[1] - f[1] * e[0]) / L2  # f . R(e), R(u)=(uy,-ux)
                rest_xy.append((x, y))
                ca = np.array([[-(1.0 - x), y], [-y, -(1.0 - x)]])
                cb = np.array([[-x, -y], [y, -x]])
                for r in range(2):
                    rows.append(row + r)
                    cols.append(2 * ic + r)
                    vals.append(1.0)
                for r in range(2):
                    for cc in range(2):
                        if ca[r, cc] != 0.0:
                            rows.append(row + r)
                            cols.append(2 * ia + cc)
                            vals.append(ca[r, cc])
                        if cb[r, cc] != 0.0:
                            rows.append(row + r)
                            cols.append(2 * ib + cc)
                            vals.append(cb[r, cc])
                row += 2
        A1 = coo_matrix((vals, (rows, cols)), shape=(row, 2 * nverts)).tocsr()

        brows, bcols, bvals = [], [], []
        for hi in range(nh):
            sl = B[hi]
            for col, val in zip(sl.indices, sl.data):
                brows += [2 * hi, 2 * hi + 1]
                bcols += [2 * col, 2 * col + 1]
                bvals += [val, val]
        Bg = coo_matrix((bvals, (brows, bcols)), shape=(2 * nh, 2 * nverts)).tocsr()

        w2 = _HANDLE_WEIGHT * _HANDLE_WEIGHT
        G1 = (A1.T @ A1 + w2 * (Bg.T @ Bg)).tocsc()
        self._lu1 = splu(G1)
        self._rhs1_of_q = (w2 * Bg.T).tocsr()

        # scale-adjust pass (x and y decouple)
        erows, ecols, evals = [], [], []
        edge_pairs = []
        er = 0
        for t in range(len(tris)):
            for k in range(3):
                i = int(tris[t, k])
                j = int(tris[t, (k + 1) % 3])
                erows += [er, er]
                ecols += [j, i]
                evals += [1.0, -1.0]
                edge_pairs.append((t, i, j))
                er += 1
        D = coo_matrix((evals, (erows, ecols)), shape=(er, nverts)).tocsr()
        G2 = (D.T @ D + w2 * (B.T @ B)).tocsc()
        self._lu2 = splu(G2)
        self._Dt = D.T.tocsr()
        self._rhs2_of_q = (w2 * B.T).tocsr()
        self._edge_tri = np.array([p[0] for p in edge_pairs], dtype=np.int64)
        self._edge_i = np.array([p[1] for p in edge_pairs], dtype=np.int64)
        self._edge_j = np.array([p[2] for p in edge_pairs], dtype=np.int64)

        self._rest_tri = verts[tris]                    # (M, 3, 2)
        self._rest_centered = self._rest_tri - self._rest_tri.mean(axis=1, keepdims=True)
        self._rest_norm2 = (self._rest_centered**2).sum(axis=(1, 2))
        self._rest_edges = verts[self._edge_j] - verts[self._edge_i]

    @property
    def handle_count(self):
        return len(self.handle_names)

    def solve(self, targets):
        """Deform so the handles reach ``targets`` (dict name -> (2,))."""
        q = np.array([targets[n] for n in self.handle_names], dtype=np.float64)
        u1 = self._lu1.solve(self._rhs1_of_q @ q.reshape(-1))
        P1 = u1.reshape(-1, 2)

        tri_pts = P1[self.mesh.triangles]              # (M, 3, 2)
        qc = tri_pts - tri_pts.mean(axis=1, keepdims=True)
        pr = self._rest_centered
        denom = np.where(self._rest_norm2 == 0.0, 1.0, self._rest_norm2)
        a = (pr * qc).sum(axis=(1, 2)) / denom
        b = (pr[:, :, 0] * qc[:, :, 1] - pr[:, :, 1] * qc[:, :, 0]).sum(axis=1) / denom
        scale = np.hypot(a, b)
        ok = scale > 1e-12
        ca = np.where(ok, a / np.where(ok, scale, 1.0), 1.0)
        sb = np.where(ok, b / np.where(ok, scale, 1.0), 0.0)

        re = self._rest_edges
        ct = ca[self._edge_tri]
        st = sb[self._edge_tri]
        ex = ct * re[:, 0] - st * re[:, 1]
        ey = st * re[:, 0] + ct * re[:, 1]

        rx = self._Dt @ ex + self._rhs2_of_q @ q[:, 0]
        ry = self._Dt @ ey + self._rhs2_of_q @ q[:, 1]
        X = self._lu2.solve(rx)
        Y = self._lu2.solve(ry)
        return np.stack([X, Y], axis=1)


def register_rest_mesh(mesh, handles):
    """Precompute the deformation system; handles must lie inside the mesh."""
    return ArapSystem(mesh, handles)


def solve(arap, targets, variant_key=""):
    return DeformedMesh(positions=arap.solve(targets), variant_key=variant_key)


def triangle_rotation(rest_tri, deformed_tri):
    """Rotation part (polar) of the affine map rest -> deformed, as (c, s).

    Returns None when the deformed triangle collapses.
    """
    pr = rest_tri - rest_tri.mean(axis=0)
    qc = deformed_tri - deformed_tri.mean(axis=0)
    denom = (pr**2).sum()
    if denom == 0.0:
        return None
    a = (pr * qc).sum() / denom
    b = (pr[:, 0] * qc[:, 1] - pr[:, 1] * qc[:, 0]).sum() / denom
    s = math.hypot(a, b)
    if s < 1e-12:
        return None
    return a / s, b / s


def place_parts(deformed, rig_view, placements, prev_frames=None):
    """Final 3x3 canvas transforms for the view's translating parts.

    Each part follows its anchor's barycentric image in the deformed mesh
    for translation and its attachment triangle's polar rotation, composed
    with the keyview-interpolated placement from retargeting.
    """
    prev_frames = prev_frames if prev_frames is not None else {}
    mesh = rig_view.mesh(deformed.variant_key)
    out = {}
    for part in rig_view.parts:
        if part.translate == "none":
            continue
        interp = placements.get(part.id)
        if interp is None:
            continue
        ti, bary = part.attachments[deformed.variant_key]
        tri = mesh.triangles[ti]
        a0 = np.asarray(part.anchor, dtype=np.float64)
        a1 = bary @ deformed.positions[tri]
        rot = triangle_rotation(mesh.vertices[tri], deformed.positions[tri])
        if rot is None:
            frame = prev_frames.get(part.id)
            if frame is None:
                frame = np.eye(3)
            out[part.id] = frame @ interp
            continue
        c, s = rot
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        Ta1 = np.eye(3)
        Ta1[:2, 2] = a1
        Ta0 = np.eye(3)
        Ta0[:2, 2] = -a0
        frame = Ta1 @ R @ Ta0
        prev_frames[part.id] = frame
        out[part.id] = frame @ interp
    return out


def composite(packet, rig, background=None, offset=(0.0, 0.0)):
    """Rasterize a frame packet over an optional background.

    Base-mesh triangles are painted grouped by joint label in the packet's
    render order; part layers go on top (parents before children), with
    enclosed parts clipped to their parent's deformed coverage and
    hide-on-back parts skipped on the back texture.  Output is straight
    alpha; identical inputs give bit-identical output.
    """
    from . import kernels

    view = rig.view(packet.view_side)
    mesh = view.mesh(packet.variant_key)
    tex = view.texture(packet.variant_key, packet.texture_side)
    h, w = tex.shape[:2]
    if background is not None:
        out = background.copy()
    else:
        out = np.zeros((h, w, 4), dtype=np.uint8)

    verts = np.asarray(packet.vertices, dtype=np.float64) + np.asarray(offset)
    labels = np.asarray(mesh.triangle_joint)
    for label in packet.render_order:
        idx = np.nonzero(labels == label)[0]
        if len(idx):
            kernels.paint_triangles(out, verts, mesh.triangles, idx, mesh.uv, tex)

    off3 = np.eye(3)
    off3[:2, 2] = offset
    for part in view.parts_in_layer_order():
        if part.translate == "none":
            continue
        if packet.texture_side == "back" and part.hide_on_back:
            continue
        placement = packet.placements.get(part.id)
        if placement is None:
            continue
        clip = None
        if part.enclosed:
            parent_tris = part.parent_triangles.get(packet.variant_key)
            if parent_tris is not None and len(parent_tris):
                clip = kernels.rasterize_coverage(
                    (h, w), verts, mesh.triangles, np.asarray(parent_tris)
                )
        sprite_origin = np.eye(3)
        sprite_origin[:2, 2] = part.bbox_min
        transform = off3 @ np.asarray(placement) @ sprite_origin
        kernels.blit_sprite(out, part.sprite, transform, clip=clip)
    return out
