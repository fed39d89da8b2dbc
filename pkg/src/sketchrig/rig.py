"""Builds the two-view character model from an AnnotationSet plus the drawing.

A view is the figure with all opposite-facing silhouette segments and part
regions mirrored in place, textured front and back (inpainted where
translating parts lift off), meshed per foot-orientation variant, and
registered for deformation.  Variant keys are two characters (left foot,
right foot) from ``l``/``r``, or ``n`` for a foot without orientation
variants.
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from . import deform
from .annotation import FIGURE_ROOT, validate
from .errors import RegistrationError, StructuralError, UnsupportedFigureError
from .motion import CHARACTER_JOINTS
from .raster import (
    extract_contour,
    simplify_polyline,
    mask_bbox,
    stitch_foot_variant,
    triangulate,
)
from .retarget import BONE_LABELS, CHARACTER_BONES

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def load_image_rgba(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA")).copy()


def save_image_rgba(arr, path):
    Image.fromarray(arr, mode="RGBA").save(path, format="PNG")


@dataclass
class PartSpec:
    """A translating part region, built for one view."""

    id: str
    translate: str
    direction: str            # view-local after mirroring
    enclosed: bool
    hide_on_back: bool
    parent: str
    layer: int
    anchor: np.ndarray        # (2,)
    key_left: np.ndarray      # 3x3, the pi/2 keyview transform
    key_right: np.ndarray     # 3x3, the 3pi/2 keyview transform
    sprite: np.ndarray        # cropped RGBA
    bbox_min: np.ndarray      # (2,) sprite origin on the canvas
    attachments: dict = field(default_factory=dict)       # variant -> (tri, bary)
    parent_triangles: dict = field(default_factory=dict)  # variant -> indices
    cannot_move: bool = False


class CharacterView:
    def __init__(self, side, keypoints, variant_keys, meshes, textures, parts,
                 masks=None):
        self.side = side
        self.keypoints = keypoints
        self.variant_keys = list(variant_keys)
        self._meshes = meshes
        self._textures = textures
        self.parts = parts
        self.masks = masks or {}

    def mesh(self, variant_key):
        return self._meshes[variant_key]

    def texture(self, variant_key, texture_side):
        return self._textures[(variant_key, texture_side)]

    def parts_in_layer_order(self):
        return sorted(self.parts, key=lambda p: (p.layer, p.id))


class CharacterRig:
    def __init__(self, left_view, right_view, bone_lengths, leg_length,
                 canvas_size, pad, original_size, foot_chars, authored_variant,
                 arap=None, build_seconds=0.0, max_area=None):
        self.left_view = left_view
        self.right_view = right_view
        self.bone_lengths = bone_lengths
        self.leg_length = leg_length
        self.canvas_size = canvas_size          # (w, h) padded
        self.pad = pad
        self.original_size = original_size
        self.foot_chars = foot_chars            # side -> available chars
        self.authored_variant = authored_variant
        self.arap = arap or {}
        self.build_seconds = build_seconds
        self.max_area = max_area

    def view(self, side):
        return self.left_view if side == "left" else self.right_view

    def arap_system(self, side, variant_key):
        key = (side, variant_key)
        if key not in self.arap:
            view = self.view(side)
            self.arap[key] = deform.register_rest_mesh(
                view.mesh(variant_key), view.keypoints
            )
        return self.arap[key]


# ---------------------------------------------------------------------------
# spec ops on parts


def compute_anchor(part_mask, direction, children_anchors=None):
    """Anchor of a part: centroid, bbox-edge-projected centroid, or the
    mean of the children's anchors for maskless parts."""
    if part_mask is None:
        if not children_anchors:
            raise StructuralError("maskless part has no children to anchor to")
        return np.mean(np.asarray(children_anchors, dtype=np.float64), axis=0)
    ys, xs = np.nonzero(part_mask)
    if len(xs) == 0:
        raise StructuralError("empty part mask has no anchor")
    cx = float(xs.mean())
    cy = float(ys.mean())
    if direction == "left":
        return np.array([xs.max() + 0.5, cy])
    if direction == "right":
        return np.array([xs.min() - 0.5, cy])
    return np.array([cx, cy])


def _boundary_ring(mask):
    return mask & ~ndimage.binary_erosion(mask, structure=_FOUR_CONN, border_value=0)


def compute_keyview_transforms(part_mask, parent_mask, enclosed):
    """Key translations: sweep the part left/right until it first touches
    the parent's boundary; non-enclosed parts cap at one part width.

    Returns (key_left 3x3, key_right 3x3, cannot_move).
    """
    from . import kernels

    blocked = _boundary_ring(parent_mask) | ~parent_mask
    pw = 0
    bb = mask_bbox(part_mask)
    if bb is not None:
        pw = bb[2] - bb[0] + 1
    limit = parent_mask.shape[1]
    s_left = kernels.first_contact_shift(part_mask, blocked, (-1, 0), limit)
    s_right = kernels.first_contact_shift(part_mask, blocked, (1, 0), limit)
    if s_left < 0:
        s_left = pw
    if s_right < 0:
        s_right = pw
    cannot_move = s_left == 0 and s_right == 0
    if not enclosed:
        s_left = min(s_left, pw)
        s_right = min(s_right, pw)
    key_left = np.eye(3)
    key_left[0, 2] = -float(s_left)
    key_right = np.eye(3)
    key_right[0, 2] = float(s_right)
    return key_left, key_right, cannot_move


def map_triangles_to_joints(mesh, keypoints):
    """Label triangles by the nearest character bone (child-joint name)."""
    cents = mesh.vertices[mesh.triangles].mean(axis=1)
    best = np.full(len(cents), np.inf)
    label_idx = np.zeros(len(cents), dtype=np.int64)
    for idx, (child, parent) in enumerate(CHARACTER_BONES):
        a = np.asarray(keypoints[parent], dtype=np.float64)
        b = np.asarray(keypoints[child], dtype=np.float64)
        d = b - a
        ln2 = float(d @ d)
        if ln2 == 0.0:
            dist = np.linalg.norm(cents - a, axis=1)
        else:
            t = np.clip(((cents - a) @ d) / ln2, 0.0, 1.0)
            proj = a + t[:, None] * d
            dist = np.linalg.norm(cents - proj, axis=1)
        better = dist < best - 1e-12
        best = np.where(better, dist, best)
        label_idx = np.where(better, idx, label_idx)
    return [BONE_LABELS[i] for i in label_idx]


# ---------------------------------------------------------------------------
# the builder


def default_max_area(figure_mask):
    """Triangle budget: land a typical figure in the 1500-3000 range."""
    area = float(figure_mask.sum())
    return float(np.clip(area / 1000.0, 8.0, 500.0))


def _mirror_about(mask, ax2):
    ys, xs = np.nonzero(mask)
    out = np.zeros_like(mask)
    out[ys, ax2 - xs] = True
    return out


class _ViewComposer:
    """Accumulates in-place mirrors on segment subtrees and parts."""

    def __init__(self, aset, image, figure_mask):
        self.aset = aset
        self.image = image
        self.figure_mask = figure_mask
        self.seg_masks = {s.id: s.mask for s in aset.segments}
        self.part_masks = {p.id: p.mask for p in aset.parts}
        self.part_dirs = {p.id: p.direction for p in aset.parts}
        self.keypoints = {k: v.copy() for k, v in aset.keypoints.items()}
        # (mask, ax2) mirror records, applied to the image in order
        self.mirrors = []
        self.vacated = np.zeros_like(figure_mask)

    def _descendant_ids(self, seg_id):
        segs = [seg_id]
        parts = []
        frontier = [seg_id]
        while frontier:
            cur = frontier.pop()
            for s in self.aset.segments:
                if s.parent == cur:
                    segs.append(s.id)
                    frontier.append(s.id)
            for p in self.aset.parts:
                if p.parent == cur:
                    parts.append(p.id)
                    frontier.append(p.id)
        return segs, parts

    def _flip_dir(self, d):
        return {"left": "right", "right": "left"}.get(d, d)

    def _mirror_unit(self, union_mask, seg_ids, part_ids):
        bb = mask_bbox(union_mask)
        if bb is None:
            return
        ax2 = bb[0] + bb[2]
        for sid in seg_ids:
            self.seg_masks[sid] = _mirror_about(self.seg_masks[sid], ax2)
        for pid in part_ids:
            if self.part_masks[pid] is not None:
                self.part_masks[pid] = _mirror_about(self.part_masks[pid], ax2)
            self.part_dirs[pid] = self._flip_dir(self.part_dirs[pid])
        for name, p in self.keypoints.items():
            xi, yi = int(np.floor(p[0])), int(np.floor(p[1]))
            if (
                0 <= yi < union_mask.shape[0]
                and 0 <= xi < union_mask.shape[1]
                and union_mask[yi, xi]
            ):
                self.keypoints[name] = np.array([ax2 + 1 - p[0], p[1]])
        self.mirrors.append((union_mask, ax2))
        reflected = _mirror_about(union_mask, ax2)
        self.vacated |= union_mask & ~reflected

    def mirror_for_side(self, side):
        """Mirror everything facing away from `side` so the view carries
        only none- and own-side-facing cues."""
        opposite = "right" if side == "left" else "left"
        mirrored_parts = set()
        mirrored_segs = set()
        for s in self.aset.segments:
            if s.parent == FIGURE_ROOT and s.orientation == opposite:
                seg_ids, part_ids = self._descendant_ids(s.id)
                union = np.zeros_like(self.figure_mask)
                for sid in seg_ids:
                    union |= self.seg_masks[sid]
                for pid in part_ids:
                    if self.part_masks[pid] is not None:
                        union |= self.part_masks[pid]
                self._mirror_unit(union, seg_ids, part_ids)
                mirrored_segs.update(seg_ids)
                mirrored_parts.update(part_ids)
        # nested opposite-facing segments under unmirrored ancestors
        for s in self.aset.segments:
            if s.id in mirrored_segs or s.parent == FIGURE_ROOT:
                continue
            if s.orientation == opposite:
                seg_ids, part_ids = self._descendant_ids(s.id)
                union = np.zeros_like(self.figure_mask)
                for sid in seg_ids:
                    union |= self.seg_masks[sid]
                for pid in part_ids:
                    if self.part_masks[pid] is not None:
                        union |= self.part_masks[pid]
                self._mirror_unit(union, seg_ids, part_ids)
                mirrored_segs.update(seg_ids)
                mirrored_parts.update(part_ids)
        # individually mirrored opposite-facing parts
        for p in self.aset.parts:
            if p.id in mirrored_parts:
                continue
            if self.part_dirs[p.id] == opposite and self.part_masks[p.id] is not None:
                m = self.part_masks[p.id]
                bb = mask_bbox(m)
                if bb is None:
                    continue
                self._mirror_unit(m, [], [p.id])

    def compose(self):
        """The view image and base mask after all mirrors."""
        img = self.image.copy()
        img[~self.figure_mask] = 0
        for unit_mask, ax2 in self.mirrors:
            src = img.copy()
            ys, xs = np.nonzero(unit_mask)
            img[ys, xs] = 0
            img[ys, ax2 - xs] = src[ys, xs]
        if self.seg_masks:
            base = np.zeros_like(self.figure_mask)
            for m in self.seg_masks.values():
                base |= m
        else:
            base = self.figure_mask.copy()
        return img, base


def _variant_keys(foot_chars):
    keys = []
    for lc in foot_chars["left"]:
        for rc in foot_chars["right"]:
            keys.append(lc + rc)
    return keys


def _locate_or_project(mesh, point, tolerance=4.0):
    hit = deform._locate_point(mesh, point)
    if hit is not None:
        return hit
    p = np.asarray(point, dtype=np.float64)
    tri_pts = mesh.vertices[mesh.triangles]
    cents = tri_pts.mean(axis=1)
    order = np.argsort(np.linalg.norm(cents - p, axis=1))[:32]
    best = None
    best_d = np.inf
    for ti in order:
        a, b, c = tri_pts[ti]
        for q in _closest_point_candidates(p, a, b, c):
            d = float(np.linalg.norm(q - p))
            if d < best_d:
                best_d = d
                best = (int(ti), q)
    if best is None or best_d > tolerance:
        raise RegistrationError(f"handle at {point} is {best_d:.2f}px outside the mesh")
    ti, q = best
    tri = mesh.triangles[ti]
    A = np.stack([mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
                  mesh.vertices[tri[2]] - mesh.vertices[tri[0]]], axis=1)
    try:
        uv = np.linalg.solve(A, q - mesh.vertices[tri[0]])
    except np.linalg.LinAlgError:
        uv = np.zeros(2)
    bary = np.array([1.0 - uv[0] - uv[1], uv[0], uv[1]])
    bary = np.clip(bary, 0.0, 1.0)
    bary /= bary.sum()
    return ti, bary


def _closest_point_candidates(p, a, b, c):
    for u, v in ((a, b), (b, c), (c, a)):
        d = v - u
        ln2 = float(d @ d)
        t = 0.0 if ln2 == 0.0 else float(np.clip((p - u) @ d / ln2, 0.0, 1.0))
        yield u + t * d


def build_rig(aset, image, max_area=None, register_arap=True, parallel=True):
    """Construct the full character rig; see the module docstring."""
    t_start = time.perf_counter()
    report = validate(aset)
    if not report.ok:
        raise StructuralError(
            "annotations fail validation:\n" + "\n".join(report.lines())
        )
    for leg in ("left_hip", "left_knee", "left_foot", "right_hip", "right_knee", "right_foot"):
        if leg not in aset.keypoints:
            raise UnsupportedFigureError(f"missing leg keypoint '{leg}'")

    h, w = aset.figure_mask.shape
    if image.shape[:2] != (h, w):
        raise StructuralError(
            f"image is {image.shape[1]}x{image.shape[0]}, mask is {w}x{h}"
        )
    bb = mask_bbox(aset.figure_mask)
    pad = bb[2] - bb[0] + 1

    def padm(m):
        return np.pad(m, ((0, 0), (pad, pad)))

    padded = _PaddedAnnotations(aset, pad)
    image_p = np.pad(image, ((0, 0), (pad, pad), (0, 0)))
    if max_area is None:
        max_area = default_max_area(aset.figure_mask)

    bone_lengths = {}
    for child, parent in CHARACTER_BONES:
        bone_lengths[child] = float(
            np.linalg.norm(padded.keypoints[child] - padded.keypoints[parent])
        )
    leg_length = 0.5 * sum(
        bone_lengths[f"{s}_knee"] + bone_lengths[f"{s}_foot"] for s in ("left", "right")
    )
    if leg_length <= 0:
        raise UnsupportedFigureError("degenerate leg chain (zero length)")

    foot_chars = {}
    authored = {}
    for side in ("left", "right"):
        o = aset.feet[side].orientation
        if o in ("left", "right") and aset.feet[side].present:
            foot_chars[side] = "lr"
            authored[side] = o[0]
        else:
            foot_chars[side] = "n"
            authored[side] = "n"
    authored_variant = authored["left"] + authored["right"]

    views = {}
    for side in ("left", "right"):
        views[side] = _build_view(padded, image_p, side, max_area, foot_chars,
                                  authored_variant)

    rig = CharacterRig(
        left_view=views["left"],
        right_view=views["right"],
        bone_lengths=bone_lengths,
        leg_length=leg_length,
        canvas_size=(w + 2 * pad, h),
        pad=pad,
        original_size=(w, h),
        foot_chars=foot_chars,
        authored_variant=authored_variant,
        max_area=max_area,
    )
    if register_arap:
        for side in ("left", "right"):
            for key in views[side].variant_keys:
                rig.arap_system(side, key)
    rig.build_seconds = time.perf_counter() - t_start
    return rig


class _PaddedAnnotations:
    """AnnotationSet with every raster and keypoint shifted by the pad."""

    def __init__(self, aset, pad):
        from .annotation import PartRegion, SilhouetteSegment

        def padm(m):
            return None if m is None else np.pad(m, ((0, 0), (pad, pad)))

        self.keypoints = {k: v + np.array([pad, 0.0]) for k, v in aset.keypoints.items()}
        self.figure_mask = padm(aset.figure_mask)
        self.segments = [
            SilhouetteSegment(id=s.id, mask=padm(s.mask), orientation=s.orientation,
                              parent=s.parent)
            for s in aset.segments
        ]
        self.parts = [
            PartRegion(id=p.id, mask=padm(p.mask), translate=p.translate,
                       direction=p.direction, enclosed=p.enclosed,
                       hide_on_back=p.hide_on_back, parent=p.parent)
            for p in aset.parts
        ]
        self.feet = aset.feet


def _build_view(padded, image_p, side, max_area, foot_chars, authored_variant):
    from .raster import inpaint

    composer = _ViewComposer(padded, image_p, padded.figure_mask)
    composer.mirror_for_side(side)
    view_img, base_mask = composer.compose()
    view_kp = composer.keypoints

    part_masks = composer.part_masks
    part_dirs = composer.part_dirs

    translating = [p for p in padded.parts if p.translate != "none"]
    holes_front = composer.vacated & base_mask
    for p in translating:
        m = part_masks[p.id]
        if m is not None:
            holes_front = holes_front | m
    holes_back = holes_front.copy()
    for p in padded.parts:
        if p.translate == "none" and p.hide_on_back and part_masks[p.id] is not None:
            holes_back = holes_back | part_masks[p.id]
    holes_front &= base_mask
    holes_back &= base_mask

    front = inpaint(view_img, holes_front, known=base_mask & ~holes_front)
    back = inpaint(view_img, holes_back, known=base_mask & ~holes_back)

    # foot variants
    keys = _variant_keys(foot_chars)
    masks = {}
    textures = {}
    for key in keys:
        m, f, b = base_mask, front, back
        for i, vside in enumerate(("left", "right")):
            if foot_chars[vside] == "n" or key[i] == authored_variant[i]:
                continue
            m, f, b = stitch_foot_variant(
                m, f, b,
                ankle=view_kp[f"{vside}_foot"],
                knee=view_kp[f"{vside}_knee"],
                side=vside,
            )
        masks[key] = m
        textures[(key, "front")] = f
        textures[(key, "back")] = b

    meshes = {}
    for key in keys:
        outer, holes = extract_contour(masks[key])
        outer = simplify_polyline(outer, 0.36)
        holes = [simplify_polyline(hh, 0.36) for hh in holes]
        mesh = triangulate(outer, holes, max_area=max_area)
        mesh.triangle_joint = map_triangles_to_joints(mesh, view_kp)
        meshes[key] = mesh

    # runtime part layers (translating parts only; static parts are baked)
    seg_ids = {s.id for s in padded.segments}
    depth = {}

    def layer_of(pid_or_parent):
        if pid_or_parent == FIGURE_ROOT or pid_or_parent in seg_ids:
            return 1
        parent = next(p.parent for p in padded.parts if p.id == pid_or_parent)
        return 1 + layer_of(parent)

    parts = []
    anchors_by_id = {}
    by_parent_pending = []
    for p in translating:
        m = part_masks[p.id]
        d = part_dirs[p.id]
        if m is None:
            by_parent_pending.append(p)
            continue
        anchors_by_id[p.id] = compute_anchor(m, d)
    for p in by_parent_pending:
        children = [
            anchors_by_id[c.id]
            for c in padded.parts
            if c.parent == p.id and c.id in anchors_by_id
        ]
        anchors_by_id[p.id] = compute_anchor(None, part_dirs[p.id], children)

    for p in translating:
        m = part_masks[p.id]
        if m is None:
            continue
        parent_mask = _parent_mask_in_view(padded, p, composer, base_mask)
        key_left, key_right, cannot = compute_keyview_transforms(
            m, parent_mask, p.enclosed
        )
        bb = mask_bbox(m)
        sprite = view_img[bb[1] : bb[3] + 1, bb[0] : bb[2] + 1].copy()
        local = m[bb[1] : bb[3] + 1, bb[0] : bb[2] + 1]
        sprite[~local] = 0
        spec = PartSpec(
            id=p.id,
            translate=p.translate,
            direction=part_dirs[p.id],
            enclosed=p.enclosed,
            hide_on_back=p.hide_on_back,
            parent=p.parent,
            layer=layer_of(p.parent),
            anchor=anchors_by_id[p.id],
            key_left=key_left,
            key_right=key_right,
            sprite=sprite,
            bbox_min=np.array([bb[0], bb[1]], dtype=np.float64),
            cannot_move=cannot,
        )
        for key in keys:
            mesh = meshes[key]
            spec.attachments[key] = _locate_or_project(mesh, spec.anchor)
            cents = mesh.vertices[mesh.triangles].mean(axis=1)
            cx = np.clip(np.floor(cents[:, 0]).astype(int), 0, parent_mask.shape[1] - 1)
            cy = np.clip(np.floor(cents[:, 1]).astype(int), 0, parent_mask.shape[0] - 1)
            spec.parent_triangles[key] = np.nonzero(parent_mask[cy, cx])[0]
        parts.append(spec)

    return CharacterView(
        side=side,
        keypoints=view_kp,
        variant_keys=keys,
        meshes=meshes,
        textures=textures,
        parts=parts,
        masks=masks,
    )


def _parent_mask_in_view(padded, part, composer, base_mask):
    pid = part.parent
    if pid == FIGURE_ROOT:
        return base_mask
    if pid in composer.seg_masks:
        return composer.seg_masks[pid]
    if pid in composer.part_masks and composer.part_masks[pid] is not None:
        return composer.part_masks[pid]
    # maskless part parent: union of its children in view space
    acc = np.zeros_like(base_mask)
    for p in padded.parts:
        if p.parent == pid and composer.part_masks.get(p.id) is not None:
            acc |= composer.part_masks[p.id]
    return acc if acc.any() else base_mask


# ---------------------------------------------------------------------------
# bundle IO

_SIDE_CODE = {"left": "L", "right": "R"}
_CODE_SIDE = {"L": "left", "R": "right"}


def save_rig(rig, out_dir):
    """Write the rig bundle: rig.json, texture/sprite PNGs, mesh JSONs."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "version": 1,
        "canvas_size": list(rig.canvas_size),
        "original_size": list(rig.original_size),
        "pad": rig.pad,
        "bone_lengths": {k: v for k, v in rig.bone_lengths.items()},
        "leg_length": rig.leg_length,
        "foot_chars": rig.foot_chars,
        "authored_variant": rig.authored_variant,
        "max_area": rig.max_area,
        "views": {},
    }
    for side in ("left", "right"):
        view = rig.view(side)
        code = _SIDE_CODE[side]
        vdoc = {
            "keypoints": {k: [float(v[0]), float(v[1])] for k, v in view.keypoints.items()},
            "variant_keys": view.variant_keys,
            "parts": [],
        }
        for key in view.variant_keys:
            for tex_side in ("front", "back"):
                save_image_rgba(
                    view.texture(key, tex_side),
                    os.path.join(out_dir, f"view-{code}.var-{key}.{tex_side}.png"),
                )
            mesh = view.mesh(key)
            mesh_doc = {
                "vertices": mesh.vertices.tolist(),
                "triangles": mesh.triangles.tolist(),
                "uv": mesh.uv.tolist(),
                "triangle_joint": mesh.triangle_joint,
            }
            with open(
                os.path.join(out_dir, f"view-{code}.var-{key}.mesh.json"), "w",
                encoding="utf-8",
            ) as fh:
                json.dump(mesh_doc, fh)
        for p in view.parts:
            sprite_name = f"view-{code}.part-{p.id}.png"
            save_image_rgba(p.sprite, os.path.join(out_dir, sprite_name))
            vdoc["parts"].append({
                "id": p.id,
                "translate": p.translate,
                "direction": p.direction,
                "enclosed": p.enclosed,
                "hide_on_back": p.hide_on_back,
                "parent": p.parent,
                "layer": p.layer,
                "anchor": p.anchor.tolist(),
                "key_left": p.key_left.tolist(),
                "key_right": p.key_right.tolist(),
                "bbox_min": p.bbox_min.tolist(),
                "sprite": sprite_name,
                "cannot_move": p.cannot_move,
                "attachments": {
                    k: [int(t), list(map(float, b))] for k, (t, b) in p.attachments.items()
                },
                "parent_triangles": {
                    k: list(map(int, v)) for k, v in p.parent_triangles.items()
                },
            })
        doc["views"][side] = vdoc
    with open(os.path.join(out_dir, "rig.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return out_dir


def load_rig(bundle_dir, register_arap=False):
    """Load a bundle written by save_rig (lossless round trip)."""
    from .raster import TexturedMesh

    with open(os.path.join(bundle_dir, "rig.json"), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    views = {}
    for side in ("left", "right"):
        vdoc = doc["views"][side]
        code = _SIDE_CODE[side]
        keypoints = {k: np.array(v, dtype=np.float64) for k, v in vdoc["keypoints"].items()}
        meshes = {}
        textures = {}
        for key in vdoc["variant_keys"]:
            with open(
                os.path.join(bundle_dir, f"view-{code}.var-{key}.mesh.json"), "r",
                encoding="utf-8",
            ) as fh:
                mdoc = json.load(fh)
            meshes[key] = TexturedMesh(
                vertices=np.array(mdoc["vertices"], dtype=np.float64),
                triangles=np.array(mdoc["triangles"], dtype=np.int32),
                uv=np.array(mdoc["uv"], dtype=np.float64),
                triangle_joint=mdoc["triangle_joint"],
            )
            for tex_side in ("front", "back"):
                textures[(key, tex_side)] = load_image_rgba(
                    os.path.join(bundle_dir, f"view-{code}.var-{key}.{tex_side}.png")
                )
        parts = []
        for pd in vdoc["parts"]:
            parts.append(PartSpec(
                id=pd["id"],
                translate=pd["translate"],
                direction=pd["direction"],
                enclosed=pd["enclosed"],
                hide_on_back=pd["hide_on_back"],
                parent=pd["parent"],
                layer=pd["layer"],
                anchor=np.array(pd["anchor"], dtype=np.float64),
                key_left=np.array(pd["key_left"], dtype=np.float64),
                key_right=np.array(pd["key_right"], dtype=np.float64),
                sprite=load_image_rgba(os.path.join(bundle_dir, pd["sprite"])),
                bbox_min=np.array(pd["bbox_min"], dtype=np.float64),
                attachments={
                    k: (int(t), np.array(b, dtype=np.float64))
                    for k, (t, b) in pd["attachments"].items()
                },
                parent_triangles={
                    k: np.array(v, dtype=np.int64)
                    for k, v in pd["parent_triangles"].items()
                },
                cannot_move=pd.get("cannot_move", False),
            ))
        views[side] = CharacterView(
            side=side,
            keypoints=keypoints,
            variant_keys=vdoc["variant_keys"],
            meshes=meshes,
            textures=textures,
            parts=parts,
        )
    rig = CharacterRig(
        left_view=views["left"],
        right_view=views["right"],
        bone_lengths={k: float(v) for k, v in doc["bone_lengths"].items()},
        leg_length=float(doc["leg_length"]),
        canvas_size=tuple(doc["canvas_size"]),
        pad=int(doc["pad"]),
        original_size=tuple(doc["original_size"]),
        foot_chars=doc["foot_chars"],
        authored_variant=doc["authored_variant"],
        max_area=doc.get("max_area"),
    )
    if register_arap:
        for side in ("left", "right"):
            for key in rig.view(side).variant_keys:
                rig.arap_system(side, key)
    return rig
