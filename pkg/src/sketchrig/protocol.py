"""Wire protocol: length-prefixed binary frames plus a JSON debug encoding.

Every message is ``u32le payload_length`` followed by the payload, which is
``u8 tag`` + body.  Frame packets serialize as four length-prefixed
sections in fixed order: header, vertices (f32 pairs), part placements
(9 x f32 each, in the view's layer order), and the render order (u8 bone
label indices into ``BONE_LABELS``).

Over a WebSocket each binary message carries exactly one frame (prefix
included), so both transports share one parser.
"""

import io
import json
import struct

import numpy as np

from .deform import FramePacket
from .errors import ProtocolError
from .retarget import BONE_LABELS

PROTOCOL_VERSION = 1
HANDSHAKE_REQUEST = f"SKETCHRIG {PROTOCOL_VERSION}"
HANDSHAKE_REPLY = f"OK SKETCHRIG {PROTOCOL_VERSION}\n"

TAG_HELLO = 1
TAG_FRAME = 2
TAG_CAMERA = 3
TAG_CONTROL = 4
TAG_ERROR = 5

CONTROL_PAUSE = 0
CONTROL_SEEK = 1
CONTROL_TOGGLE_VIEW_DEPENDENCE = 2
CONTROL_TOGGLE_LIMB_SWAP = 3
CONTROL_TOGGLE_PLANE_OPT = 4

_SIDE_CODE = {"left": 0, "right": 1}
_CODE_SIDE = {0: "left", 1: "right"}
_TEX_CODE = {"front": 0, "back": 1}
_CODE_TEX = {0: "front", 1: "back"}

_HEADER = struct.Struct("<IdBB2sBBffffff")


def frame_bytes(payload):
    return struct.pack("<I", len(payload)) + payload


def read_frame(stream):
    """Read one length-prefixed frame from a file-like stream; None at EOF."""
    head = stream.read(4)
    if not head:
        return None
    if len(head) < 4:
        raise ProtocolError("truncated frame length")
    (length,) = struct.unpack("<I", head)
    if length > 512 * 1024 * 1024:
        raise ProtocolError(f"frame of {length} bytes exceeds the size limit")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise ProtocolError("truncated frame payload")
        payload += chunk
    return payload


def _section(data):
    return struct.pack("<I", len(data)) + data


def _take_section(buf, pos):
    if pos + 4 > len(buf):
        raise ProtocolError("truncated section length")
    (length,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if pos + length > len(buf):
        raise ProtocolError("truncated section body")
    return buf[pos : pos + length], pos + length


def encode_packet(packet, part_order):
    """FramePacket -> tag 2 payload; ``part_order`` fixes placement order."""
    header = _HEADER.pack(
        packet.frame_index,
        packet.theta,
        _SIDE_CODE[packet.view_side],
        _TEX_CODE[packet.texture_side],
        packet.variant_key.encode("ascii"),
        1 if packet.limb_swapped else 0,
        0,
        *[float(v) for v in packet.plane_origin],
        *[float(v) for v in packet.plane_normal],
    )
    verts = np.asarray(packet.vertices, dtype="<f4").tobytes()
    placements = b""
    for pid in part_order:
        m = packet.placements.get(pid)
        if m is None:
            m = np.eye(3)
        placements += np.asarray(m, dtype="<f4").tobytes()
    order = bytes(BONE_LABELS.index(lbl) for lbl in packet.render_order)
    body = _section(header) + _section(verts) + _section(placements) + _section(order)
    return bytes([TAG_FRAME]) + body


def decode_packet(payload, part_order):
    if not payload or payload[0] != TAG_FRAME:
        raise ProtocolError("not a frame packet payload")
    pos = 1
    header, pos = _take_section(payload, pos)
    verts_b, pos = _take_section(payload, pos)
    plc_b, pos = _take_section(payload, pos)
    order_b, pos = _take_section(payload, pos)
    if len(header) != _HEADER.size:
        raise ProtocolError(f"bad frame header size {len(header)}")
    (frame_index, theta, side, tex, variant, swapped, _pad,
     ox, oy, oz, nx, ny, nz) = _HEADER.unpack(header)
    verts = np.frombuffer(verts_b, dtype="<f4").reshape(-1, 2).astype(np.float64)
    mats = np.frombuffer(plc_b, dtype="<f4").reshape(-1, 3, 3).astype(np.float64)
    if len(mats) != len(part_order):
        raise ProtocolError(
            f"{len(mats)} placements for {len(part_order)} parts"
        )
    placements = {pid: mats[i] for i, pid in enumerate(part_order)}
    try:
        order = [BONE_LABELS[b] for b in order_b]
    except IndexError:
        raise ProtocolError("render order label out of range") from None
    return FramePacket(
        frame_index=frame_index,
        view_side=_CODE_SIDE[side],
        variant_key=variant.decode("ascii"),
        texture_side=_CODE_TEX[tex],
        vertices=verts,
        placements=placements,
        render_order=order,
        plane_origin=np.array([ox, oy, oz], dtype=np.float64),
        plane_normal=np.array([nx, ny, nz], dtype=np.float64),
        theta=theta,
        limb_swapped=bool(swapped),
    )


def packet_to_json(packet):
    """Structured-text debug encoding of a frame packet."""
    return json.dumps({
        "frame_index": packet.frame_index,
        "view_side": packet.view_side,
        "variant_key": packet.variant_key,
        "texture_side": packet.texture_side,
        "theta": packet.theta,
        "plane_origin": [float(v) for v in packet.plane_origin],
        "plane_normal": [float(v) for v in packet.plane_normal],
        "render_order": list(packet.render_order),
        "vertices": np.asarray(packet.vertices, dtype=np.float64).tolist(),
        "placements": {k: np.asarray(v).tolist() for k, v in packet.placements.items()},
    }, sort_keys=True)


def encode_camera(position):
    return bytes([TAG_CAMERA]) + struct.pack("<ddd", *[float(v) for v in position])


def decode_camera(payload):
    if len(payload) != 1 + 24:
        raise ProtocolError("bad camera update size")
    return np.array(struct.unpack_from("<ddd", payload, 1))


def encode_control(code, value=0.0):
    return bytes([TAG_CONTROL, code]) + struct.pack("<d", float(value))


def decode_control(payload):
    if len(payload) != 2 + 8:
        raise ProtocolError("bad control message size")
    return payload[1], struct.unpack_from("<d", payload, 2)[0]


def encode_error(code, message):
    data = message.encode("utf-8")
    return bytes([TAG_ERROR]) + struct.pack("<H", code) + data


def decode_error(payload):
    (code,) = struct.unpack_from("<H", payload, 1)
    return code, payload[3:].decode("utf-8")


# ---------------------------------------------------------------------------
# Hello: rig metadata + meshes + textures


def encode_hello(rig, clip_frames, frame_time):
    """Rig manifest (JSON) plus a binary blob of meshes, textures, sprites."""
    import os
    from PIL import Image

    blob = io.BytesIO()

    def put(data):
        off = blob.tell()
        blob.write(data)
        return [off, len(data)]

    def png_bytes(arr):
        buf = io.BytesIO()
        Image.fromarray(arr, mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()

    manifest = {
        "version": PROTOCOL_VERSION,
        "canvas_size": list(rig.canvas_size),
        "bone_lengths": rig.bone_lengths,
        "leg_length": rig.leg_length,
        "foot_chars": rig.foot_chars,
        "bone_labels": list(BONE_LABELS),
        "clip": {"frames": int(clip_frames), "frame_time": float(frame_time)},
        "views": {},
    }
    for side in ("left", "right"):
        view = rig.view(side)
        vdoc = {
            "keypoints": {k: [float(v[0]), float(v[1])] for k, v in view.keypoints.items()},
            "variant_keys": view.variant_keys,
            "meshes": {},
            "textures": {},
            "parts": [],
        }
        for key in view.variant_keys:
            mesh = view.mesh(key)
            vdoc["meshes"][key] = {
                "vertices": put(np.asarray(mesh.vertices, dtype="<f4").tobytes()),
                "triangles": put(np.asarray(mesh.triangles, dtype="<u4").tobytes()),
                "uv": put(np.asarray(mesh.uv, dtype="<f4").tobytes()),
                "triangle_joint": put(bytes(
                    BONE_LABELS.index(lbl) for lbl in mesh.triangle_joint
                )),
            }
            vdoc["textures"][key] = {
                "front": put(png_bytes(view.texture(key, "front"))),
                "back": put(png_bytes(view.texture(key, "back"))),
            }
        for p in view.parts_in_layer_order():
            vdoc["parts"].append({
                "id": p.id,
                "translate": p.translate,
                "enclosed": p.enclosed,
                "hide_on_back": p.hide_on_back,
                "layer": p.layer,
                "anchor": p.anchor.tolist(),
                "bbox_min": p.bbox_min.tolist(),
                "sprite": put(png_bytes(p.sprite)),
                "parent_triangles": {
                    k: put(np.asarray(v, dtype="<u4").tobytes())
                    for k, v in p.parent_triangles.items()
                },
            })
        manifest["views"][side] = vdoc
    mjson = json.dumps(manifest, sort_keys=True).encode("utf-8")
    body = struct.pack("<I", len(mjson)) + mjson + blob.getvalue()
    return bytes([TAG_HELLO]) + body


def decode_hello(payload):
    """-> (manifest dict, blob bytes); blob segments are [offset, length]."""
    if not payload or payload[0] != TAG_HELLO:
        raise ProtocolError("not a hello payload")
    if len(payload) < 5:
        raise ProtocolError("truncated hello")
    (jlen,) = struct.unpack_from("<I", payload, 1)
    start = 5
    if start + jlen > len(payload):
        raise ProtocolError("truncated hello manifest")
    manifest = json.loads(payload[start : start + jlen].decode("utf-8"))
    if manifest.get("version") != PROTOCOL_VERSION:
        raise ProtocolError(f"protocol version mismatch: {manifest.get('version')}")
    blob = payload[start + jlen :]
    return manifest, blob
