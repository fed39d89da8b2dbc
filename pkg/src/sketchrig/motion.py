"""BVH ingest, forward kinematics, and view geometry.

World convention: y up, right-handed, ground projection drops y and keeps
(x, z).  `view_angle` measures counter-clockwise from above, so a
character looking screen-left from the camera's point of view sits at
pi/2 and one facing the camera at pi.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BvhError, ConfigError, DegenerateViewError

CHARACTER_JOINTS = (
    "root_hip", "torso", "neck", "head_top",
    "left_shoulder", "left_elbow", "left_hand",
    "right_shoulder", "right_elbow", "right_hand",
    "left_hip", "left_knee", "left_foot",
    "right_hip", "right_knee", "right_foot",
)

_POSITION_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_ROTATION_CHANNELS = {"Xrotation": 0, "Yrotation": 1, "Zrotation": 2}


@dataclass
class Joint:
    name: str
    parent: int                      # -1 for the root
    offset: np.ndarray               # (3,) float64
    channels: list                   # channel names in file order
    children: list = field(default_factory=list)
    is_end_site: bool = False


@dataclass
class SkeletonHierarchy:
    joints: list                     # Joint, pre-order
    root: int = 0

    def index(self, name):
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    @property
    def names(self):
        return [j.name for j in self.joints]

    @property
    def channel_count(self):
        return sum(len(j.channels) for j in self.joints)


@dataclass
class MotionClip:
    frame_time: float
    frames: np.ndarray               # (F, C) float64

    @property
    def frame_count(self):
        return len(self.frames)


class Pose:
    """World-space joint positions for one frame."""

    def __init__(self, hierarchy, positions):
        self.hierarchy = hierarchy
        self.positions = positions   # (J, 3) float64
        self._by_name = {j.name: i for i, j in enumerate(hierarchy.joints)}

    def __getitem__(self, name):
        return self.positions[self._by_name[name]]

    def __contains__(self, name):
        return name in self._by_name


# ---------------------------------------------------------------------------
# BVH


class _Tokens:
    def __init__(self, text):
        self.items = []
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def next(self, expect=None):
        if self.pos >= len(self.items):
            raise BvhError("unexpected end of file")
        tok, ln = self.items[self.pos]
        self.pos += 1
        if expect is not None and tok.upper() != expect.upper():
            raise BvhError(f"expected '{expect}', got '{tok}'", line=ln)
        return tok, ln

    def next_float(self):
        tok, ln = self.next()
        try:
            return float(tok)
        except ValueError:
            raise BvhError(f"expected a number, got '{tok}'", line=ln) from None


def parse_bvh(text):
    """Parse BVH 1.0 text into (SkeletonHierarchy, MotionClip)."""
    toks = _Tokens(text)
    toks.next("HIERARCHY")
    toks.next("ROOT")
    joints = []

    def read_joint(parent, is_end=False, forced_name=None):
        if forced_name is None:
            name, _ = toks.next()
        else:
            name = forced_name
        idx = len(joints)
        joints.append(Joint(name=name, parent=parent, offset=np.zeros(3),
                            channels=[], is_end_site=is_end))
        if parent >= 0:
            joints[parent].children.append(idx)
        toks.next("{")
        toks.next("OFFSET")
        joints[idx].offset = np.array(
            [toks.next_float(), toks.next_float(), toks.next_float()]
        )
        if not is_end:
            tok, ln = toks.next()
            if tok.upper() != "CHANNELS":
                raise BvhError("expected CHANNELS after OFFSET", line=ln)
            n, ln2 = toks.next()
            try:
                n = int(n)
            except ValueError:
                raise BvhError(f"bad channel count '{n}'", line=ln2) from None
            for _ in range(n):
                ch, ln3 = toks.next()
                if ch not in _POSITION_CHANNELS and ch not in _ROTATION_CHANNELS:
                    raise BvhError(f"unknown channel '{ch}'", line=ln3)
                joints[idx].channels.append(ch)
        while True:
            tok, ln = toks.next()
            up = tok.upper()
            if up == "}":
                return
            if up == "JOINT":
                read_joint(idx)
            elif up == "END":
                toks.next("Site")
                read_joint(idx, is_end=True, forced_name=joints[idx].name + "_end")
            else:
                raise BvhError(f"unexpected token '{tok}' in joint block", line=ln)

    read_joint(-1)
    hierarchy = SkeletonHierarchy(joints=joints, root=0)

    toks.next("MOTION")
    toks.next("Frames:")
    nframes_tok, ln = toks.next()
    try:
        nframes = int(nframes_tok)
    except ValueError:
        raise BvhError(f"bad frame count '{nframes_tok}'", line=ln) from None
    tok, ln = toks.next()
    if tok.upper() != "FRAME":
        raise BvhError("expected 'Frame Time:'", line=ln)
    toks.next("Time:")
    frame_time = toks.next_float()
    if frame_time <= 0:
        raise BvhError("frame time must be positive", line=ln)
    ccount = hierarchy.channel_count
    values = []
    for _ in range(nframes * ccount):
        values.append(toks.next_float())
    if toks.peek() is not None:
        tok, ln = toks.next()
        raise BvhError(
            f"trailing data after {nframes} frames x {ccount} channels", line=ln
        )
    frames = np.asarray(values, dtype=np.float64).reshape(nframes, ccount)
    return hierarchy, MotionClip(frame_time=frame_time, frames=frames)


def emit_bvh(hierarchy, clip):
    """Serialize (hierarchy, clip) back to BVH text."""
    lines = ["HIERARCHY"]

    def emit_joint(idx, depth, keyword):
        j = hierarchy.joints[idx]
        pad = "  " * depth
        if j.is_end_site:
            lines.append(f"{pad}End Site")
        else:
            lines.append(f"{pad}{keyword} {j.name}")
        lines.append(f"{pad}{{")
        ox, oy, oz = j.offset
        lines.append(f"{pad}  OFFSET {ox:.6f} {oy:.6f} {oz:.6f}")
        if not j.is_end_site:
            lines.append(f"{pad}  CHANNELS {len(j.channels)} " + " ".join(j.channels))
        for c in j.children:
            emit_joint(c, depth + 1, "JOINT")
        lines.append(f"{pad}}}")

    emit_joint(hierarchy.root, 0, "ROOT")
    lines.append("MOTION")
    lines.append(f"Frames: {clip.frame_count}")
    lines.append(f"Frame Time: {clip.frame_time:.8f}")
    for row in clip.frames:
        lines.append(" ".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


def _rot_x(deg):
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(deg):
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(deg):
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


_ROT_FN = {"Xrotation": _rot_x, "Yrotation": _rot_y, "Zrotation": _rot_z}


def forward_kinematics(hierarchy, clip, frame_index):
    """World joint positions at a frame, composing channels in file order."""
    if not 0 <= frame_index < clip.frame_count:
        raise IndexError(f"frame {frame_index} out of range 0..{clip.frame_count - 1}")
    row = clip.frames[frame_index]
    joints = hierarchy.joints
    positions = np.zeros((len(joints), 3))
    rotations = [None] * len(joints)
    cursor = 0
    for i, j in enumerate(joints):
        local_t = j.offset.copy()
        local_r = np.eye(3)
        for ch in j.channels:
            v = row[cursor]
            cursor += 1
            if ch in _POSITION_CHANNELS:
                local_t[_POSITION_CHANNELS[ch]] += v
            else:
                local_r = local_r @ _ROT_FN[ch](v)
        if j.parent < 0:
            positions[i] = local_t
            rotations[i] = local_r
        else:
            pr = rotations[j.parent]
            positions[i] = positions[j.parent] + pr @ local_t
            rotations[i] = pr @ local_r
    return Pose(hierarchy, positions)


def bone_lengths_of_pose(pose):
    """Per-joint distance to parent; index-aligned with hierarchy.joints."""
    joints = pose.hierarchy.joints
    out = np.zeros(len(joints))
    for i, j in enumerate(joints):
        if j.parent >= 0:
            out[i] = float(np.linalg.norm(pose.positions[i] - pose.positions[j.parent]))
    return out


# ---------------------------------------------------------------------------
# joint mapping


class JointMap:
    """Maps the 15 character joints to skeleton joint names.

    The config document maps each character joint to a name or a list of
    candidate names; `resolve` picks the first candidate present in the
    hierarchy and raises listing any character joints left unmapped.
    """

    def __init__(self, mapping):
        self.mapping = dict(mapping)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def default(cls):
        from importlib import resources

        with resources.files("sketchrig.data").joinpath("jointmap_default.json").open(
            "r", encoding="utf-8"
        ) as fh:
            return cls(json.load(fh))

    def resolve(self, hierarchy):
        names = set(hierarchy.names)
        resolved = {}
        missing = []
        for cj in CHARACTER_JOINTS:
            cands = self.mapping.get(cj)
            if cands is None:
                missing.append(cj)
                continue
            if isinstance(cands, str):
                cands = [cands]
            hit = next((c for c in cands if c in names), None)
            if hit is None:
                missing.append(cj)
            else:
                resolved[cj] = hit
        if missing:
            raise ConfigError(
                "joint map leaves character joints unmapped: " + ", ".join(missing)
            )
        return resolved


# ---------------------------------------------------------------------------
# view geometry


def ground(v):
    """Ground projection of a 3D vector: (x, z)."""
    return np.array([v[0], v[2]], dtype=np.float64)


def rot_ccw(v):
    """+90 degrees counter-clockwise (seen from above) on the ground plane."""
    return np.array([v[1], -v[0]], dtype=np.float64)


def root_view_vector(camera, root):
    """Unit ground direction from the camera to the character root."""
    d = ground(np.asarray(root, dtype=np.float64) - np.asarray(camera, dtype=np.float64))
    n = float(np.hypot(d[0], d[1]))
    if n < 1e-12:
        raise DegenerateViewError("camera is directly above the character root")
    return d / n


def skeleton_forward(pose, joint_map, previous=None):
    """Unit ground projection of the skeleton's chest normal.

    Degenerate (collinear/flat) torsos fall back to ``previous``; on the
    first frame that is an error.
    """
    ls = pose[joint_map["left_shoulder"]]
    rs = pose[joint_map["right_shoulder"]]
    mid_hip = 0.5 * (pose[joint_map["left_hip"]] + pose[joint_map["right_hip"]])
    normal = np.cross(rs - ls, mid_hip - ls)
    g = ground(normal)
    n = float(np.hypot(g[0], g[1]))
    if n < 1e-9:
        if previous is None:
            raise DegenerateViewError("degenerate torso on the first frame")
        return previous.copy()
    return g / n


def view_angle(root_view, forward):
    """CCW-from-above angle from root_view to forward, in [0, 2pi).

    pi means the character faces the camera; 0 faces away; pi/2 looks
    screen-left.
    """
    left = rot_ccw(root_view)
    theta = math.atan2(float(np.dot(forward, left)), float(np.dot(forward, root_view)))
    if theta < 0.0:
        theta += 2.0 * math.pi
    return theta % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# camera tracks


@dataclass
class CameraTrack:
    """Per-frame camera positions: fixed, listed, or orbiting the root."""

    mode: str                         # "fixed" | "list" | "orbit"
    position: np.ndarray = None       # fixed
    positions: np.ndarray = None      # list, (F, 3)
    radius: float = 0.0               # orbit
    height: float = 0.0
    angular_velocity: float = 0.0     # rad/s
    phase: float = 0.0

    @classmethod
    def fixed(cls, position):
        return cls(mode="fixed", position=np.asarray(position, dtype=np.float64))

    @classmethod
    def from_list(cls, positions):
        return cls(mode="list", positions=np.asarray(positions, dtype=np.float64))

    @classmethod
    def orbit(cls, radius, height, angular_velocity, phase=0.0):
        if radius <= 0:
            raise ConfigError("orbit radius must be positive")
        return cls(mode="orbit", radius=float(radius), height=float(height),
                   angular_velocity=float(angular_velocity), phase=float(phase))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_doc(doc)

    @classmethod
    def from_doc(cls, doc):
        mode = doc.get("mode")
        if mode == "fixed":
            return cls.fixed(doc["position"])
        if mode == "list":
            return cls.from_list(doc["positions"])
        if mode == "orbit":
            return cls.orbit(doc["radius"], doc.get("height", 0.0),
                             doc.get("angular_velocity", 0.0), doc.get("phase", 0.0))
        raise ConfigError(f"unknown camera mode '{mode}'")

    def at(self, frame_index, time_s, root_ground):
        if self.mode == "fixed":
            return self.position
        if self.mode == "list":
            i = min(frame_index, len(self.positions) - 1)
            return self.positions[i]
        phi = self.phase + self.angular_velocity * time_s
        return np.array([
            root_ground[0] + self.radius * math.sin(phi),
            self.height,
            root_ground[1] + self.radius * math.cos(phi),
        ])
