"""The annotation document: parsing, validation, serialization.

The document is UTF-8 JSON with the normative keys ``version`` (=1),
``image``, ``keypoints``, ``figure_mask``, ``segments``, ``parts`` and
``feet``.  Masks are referenced 1-bit PNG files or inline run-length
objects ``{"size": [w, h], "rle": [counts...]}`` (row-major, first run
counts zeros).

All types are plain data, immutable by convention after parsing, and safe
to share across threads.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    AnnotationParseError,
    DimensionError,
    ReferenceResolutionError,
)

KEYPOINT_NAMES = (
    "root_hip", "torso", "neck", "head_top",
    "left_shoulder", "left_elbow", "left_hand",
    "right_shoulder", "right_elbow", "right_hand",
    "left_hip", "left_knee", "left_foot",
    "right_hip", "right_knee", "right_foot",
)
_PAIRED = ("shoulder", "elbow", "hand", "hip", "knee", "foot")
_ORIENTATIONS = ("left", "right", "none")
_TRANSLATE_MODES = ("none", "smooth", "discrete")
FIGURE_ROOT = "figure"

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass
class SilhouetteSegment:
    id: str
    mask: np.ndarray
    orientation: str
    parent: str = FIGURE_ROOT


@dataclass
class PartRegion:
    id: str
    mask: np.ndarray          # None for union-of-children parts
    translate: str
    direction: str
    enclosed: bool
    hide_on_back: bool
    parent: str = FIGURE_ROOT


@dataclass
class FootAnnotation:
    side: str
    present: bool = True
    orientation: str = "none"


@dataclass
class AnnotationSet:
    keypoints: dict           # name -> (2,) float64, image pixel coords
    figure_mask: np.ndarray
    segments: list
    parts: list
    feet: dict                # side -> FootAnnotation
    image_path: str = ""
    image_size: tuple = None  # (w, h)

    def segment(self, sid):
        for s in self.segments:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def part(self, pid):
        for p in self.parts:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def effective_part_mask(self, part, _seen=None):
        """A part's mask, or the union of its children's effective masks."""
        if part.mask is not None:
            return part.mask
        _seen = _seen or set()
        if part.id in _seen:
            return None
        _seen.add(part.id)
        acc = None
        for p in self.parts:
            if p.parent == part.id:
                m = self.effective_part_mask(p, _seen)
                if m is not None:
                    acc = m if acc is None else (acc | m)
        return acc

    def parent_effective_mask(self, part):
        """The region a part must stay within: its parent's mask."""
        pid = part.parent
        if pid == FIGURE_ROOT:
            return self.figure_mask
        for s in self.segments:
            if s.id == pid:
                return s.mask
        for p in self.parts:
            if p.id == pid:
                return self.effective_part_mask(p)
        return None


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    def add(self, code, message):
        self.entries.append((code, message))

    @property
    def ok(self):
        return not self.entries

    def lines(self):
        return [f"{code}: {message}" for code, message in self.entries]

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------------------
# mask codecs


def decode_mask(ref, image_size, base_dir=".", path=""):
    w, h = image_size
    if isinstance(ref, str):
        fname = os.path.join(base_dir, ref)
        try:
            with Image.open(fname) as im:
                arr = np.asarray(im.convert("L"))
        except FileNotFoundError:
            raise AnnotationParseError(f"mask file not found: {ref}", path) from None
        mask = arr > 127
    elif isinstance(ref, dict) and "rle" in ref:
        size = ref.get("size")
        if not size or len(size) != 2:
            raise AnnotationParseError("rle mask needs a [w, h] size", path)
        rw, rh = int(size[0]), int(size[1])
        counts = ref["rle"]
        total = int(sum(counts))
        if total != rw * rh:
            raise DimensionError(
                f"{path}: rle counts cover {total} pixels, mask is {rw}x{rh}"
            )
        flat = np.zeros(total, dtype=bool)
        pos = 0
        val = False
        for c in counts:
            c = int(c)
            if val:
                flat[pos : pos + c] = True
            pos += c
            val = not val
        mask = flat.reshape(rh, rw)
    else:
        raise AnnotationParseError("mask must be a file path or an rle object", path)
    if mask.shape != (h, w):
        raise DimensionError(
            f"{path}: mask is {mask.shape[1]}x{mask.shape[0]}, image is {w}x{h}"
        )
    return mask


def encode_mask_rle(mask):
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    counts = []
    current = False
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = bool(v)
            run = 1
    counts.append(run)
    return {"size": [mask.shape[1], mask.shape[0]], "rle": counts}


def save_mask_png(mask, path):
    Image.fromarray(np.asarray(mask, dtype=bool)).save(path, format="PNG", bits=1)


# ---------------------------------------------------------------------------
# parse / serialize


def _require(doc, key, path):
    if key not in doc:
        raise AnnotationParseError(f"missing required key '{key}'", path)
    return doc[key]


def _enum(value, allowed, path):
    if value not in allowed:
        raise AnnotationParseError(f"'{value}' not one of {allowed}", path)
    return value


def parse_annotations(doc, image_size, base_dir="."):
    """Parse a loaded annotation document into a resolved AnnotationSet."""
    if not isinstance(doc, dict):
        raise AnnotationParseError("document root must be an object", "$")
    version = _require(doc, "version", "$")
    if version != 1:
        raise AnnotationParseError(f"unsupported version {version}", "$.version")

    kp_doc = _require(doc, "keypoints", "$")
    keypoints = {}
    for name in KEYPOINT_NAMES:
        if name not in kp_doc:
            raise AnnotationParseError(f"missing keypoint '{name}'", "$.keypoints")
        xy = kp_doc[name]
        if not isinstance(xy, (list, tuple)) or len(xy) != 2:
            raise AnnotationParseError(f"keypoint '{name}' must be [x, y]", "$.keypoints")
        keypoints[name] = np.array([float(xy[0]), float(xy[1])])
    extra = set(kp_doc) - set(KEYPOINT_NAMES)
    if extra:
        raise AnnotationParseError(f"unknown keypoints {sorted(extra)}", "$.keypoints")

    figure_mask = decode_mask(
        _require(doc, "figure_mask", "$"), image_size, base_dir, "$.figure_mask"
    )

    segments = []
    seg_ids = set()
    for i, sd in enumerate(doc.get("segments", [])):
        path = f"$.segments[{i}]"
        sid = _require(sd, "id", path)
        if sid in seg_ids or sid == FIGURE_ROOT:
            raise AnnotationParseError(f"duplicate or reserved segment id '{sid}'", path)
        seg_ids.add(sid)
        segments.append(
            SilhouetteSegment(
                id=sid,
                mask=decode_mask(_require(sd, "mask", path), image_size, base_dir, path),
                orientation=_enum(sd.get("orientation", "none"), _ORIENTATIONS, path),
                parent=sd.get("parent", FIGURE_ROOT),
            )
        )

    parts = []
    part_ids = set()
    for i, pd in enumerate(doc.get("parts", [])):
        path = f"$.parts[{i}]"
        pid = _require(pd, "id", path)
        if pid in part_ids or pid in seg_ids or pid == FIGURE_ROOT:
            raise AnnotationParseError(f"duplicate or reserved part id '{pid}'", path)
        part_ids.add(pid)
        mask = pd.get("mask")
        parts.append(
            PartRegion(
                id=pid,
                mask=None if mask is None else decode_mask(mask, image_size, base_dir, path),
                translate=_enum(pd.get("translate", "none"), _TRANSLATE_MODES, path),
                direction=_enum(pd.get("direction", "none"), _ORIENTATIONS, path),
                enclosed=bool(pd.get("enclosed", False)),
                hide_on_back=bool(pd.get("hide_on_back", False)),
                parent=pd.get("parent", FIGURE_ROOT),
            )
        )

    known = seg_ids | part_ids | {FIGURE_ROOT}
    for s in segments:
        if s.parent not in known or s.parent in part_ids:
            raise ReferenceResolutionError(
                f"segment '{s.id}' has unknown parent '{s.parent}'"
            )
    for p in parts:
        if p.parent not in known:
            raise ReferenceResolutionError(
                f"part '{p.id}' has unknown parent '{p.parent}'"
            )

    feet = {}
    feet_doc = doc.get("feet", {})
    for side in ("left", "right"):
        fd = feet_doc.get(side)
        if fd is None:
            feet[side] = FootAnnotation(side=side, present=True, orientation="none")
        else:
            feet[side] = FootAnnotation(
                side=side,
                present=bool(fd.get("present", True)),
                orientation=_enum(fd.get("orientation", "none"), _ORIENTATIONS, f"$.feet.{side}"),
            )
    unknown_sides = set(feet_doc) - {"left", "right"}
    if unknown_sides:
        raise AnnotationParseError(f"unknown feet sides {sorted(unknown_sides)}", "$.feet")

    return AnnotationSet(
        keypoints=keypoints,
        figure_mask=figure_mask,
        segments=segments,
        parts=parts,
        feet=feet,
        image_path=doc.get("image", ""),
        image_size=tuple(image_size),
    )


def load_annotations(path):
    """Load a document from disk; returns (AnnotationSet, doc dict)."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    img_ref = doc.get("image")
    if not img_ref:
        raise AnnotationParseError("missing required key 'image'", "$")
    img_path = os.path.join(base, img_ref)
    try:
        with Image.open(img_path) as im:
            size = im.size
    except FileNotFoundError:
        raise AnnotationParseError(f"image file not found: {img_ref}", "$.image") from None
    return parse_annotations(doc, size, base), doc


def serialize_annotations(aset, out_dir, doc_name="annotations.json"):
    """Write the document plus mask PNGs; inverse of parse up to layout."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "version": 1,
        "image": aset.image_path or "drawing.png",
        "keypoints": {k: [float(v[0]), float(v[1])] for k, v in aset.keypoints.items()},
        "figure_mask": "figure_mask.png",
        "segments": [],
        "parts": [],
        "feet": {
            side: {"present": f.present, "orientation": f.orientation}
            for side, f in aset.feet.items()
        },
    }
    save_mask_png(aset.figure_mask, os.path.join(out_dir, "figure_mask.png"))
    for s in aset.segments:
        fname = f"segment_{s.id}.png"
        save_mask_png(s.mask, os.path.join(out_dir, fname))
        doc["segments"].append(
            {"id": s.id, "mask": fname, "orientation": s.orientation, "parent": s.parent}
        )
    for p in aset.parts:
        entry = {
            "id": p.id,
            "translate": p.translate,
            "direction": p.direction,
            "enclosed": p.enclosed,
            "hide_on_back": p.hide_on_back,
            "parent": p.parent,
        }
        if p.mask is not None:
            fname = f"part_{p.id}.png"
            save_mask_png(p.mask, os.path.join(out_dir, fname))
            entry["mask"] = fname
        doc["parts"].append(entry)
    out_path = os.path.join(out_dir, doc_name)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return out_path


# ---------------------------------------------------------------------------
# validation


def _inside_mask(mask, point):
    x, y = int(np.floor(point[0])), int(np.floor(point[1]))
    if not (0 <= x < mask.shape[1] and 0 <= y < mask.shape[0]):
        return False
    return bool(mask[y, x])


def validate(aset):
    """Check every structural invariant; returns a report (never raises)."""
    report = ValidationReport()
    w, h = aset.image_size
    mask = aset.figure_mask

    if not mask.any():
        report.add("mask_empty", "figure mask has no foreground pixels")
    else:
        _, ncomp = ndimage.label(mask, structure=_FOUR_CONN)
        if ncomp != 1:
            report.add(
                "mask_not_contiguous",
                f"figure mask has {ncomp} 4-connected components (must be 1)",
            )

    for name, p in aset.keypoints.items():
        if not (0 <= p[0] < w and 0 <= p[1] < h):
            report.add("keypoint_outside_image", name)
        elif not _inside_mask(mask, p):
            report.add("keypoint_outside_mask", name)
    for part_name in _PAIRED:
        a = aset.keypoints[f"left_{part_name}"]
        b = aset.keypoints[f"right_{part_name}"]
        if np.array_equal(a, b):
            report.add("keypoint_pair_identical", part_name)

    if aset.segments:
        union = np.zeros_like(mask)
        overlap = 0
        for s in aset.segments:
            overlap += int((union & s.mask).sum())
            union |= s.mask
        if overlap:
            report.add("segments_overlap", f"{overlap} pixels covered twice")
        uncovered = int((mask & ~union).sum())
        extra = int((union & ~mask).sum())
        if uncovered or extra:
            report.add(
                "segment_union_mismatch",
                f"{uncovered} figure pixels uncovered, {extra} outside the figure",
            )
        for s in aset.segments:
            if not s.mask.any():
                report.add("segment_empty", s.id)
                continue
            _, n = ndimage.label(s.mask, structure=_FOUR_CONN)
            if n != 1:
                report.add("segment_not_contiguous", f"{s.id} ({n} components)")

    ids = {p.id: p for p in aset.parts}
    for p in aset.parts:
        seen = set()
        cur = p
        while cur.parent in ids:
            if cur.parent in seen or cur.parent == p.id:
                report.add("part_parent_cycle", p.id)
                break
            seen.add(cur.parent)
            cur = ids[cur.parent]
    for p in aset.parts:
        if p.mask is None:
            eff = aset.effective_part_mask(p)
            if eff is None or not eff.any():
                report.add("maskless_part_no_masked_child", p.id)
            continue
        parent_mask = aset.parent_effective_mask(p)
        if parent_mask is None:
            report.add("part_parent_unresolved", p.id)
        else:
            outside = int((p.mask & ~parent_mask).sum())
            if outside:
                report.add(
                    "part_mask_outside_parent", f"{p.id} ({outside} pixels outside)"
                )
        if not p.mask.any():
            report.add("part_mask_empty", p.id)

    return report
