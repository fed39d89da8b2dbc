import io
import math

import numpy as np
import pytest

from sketchrig import protocol
from sketchrig.deform import FramePacket
from sketchrig.errors import ProtocolError
from sketchrig.retarget import BONE_LABELS


def _packet(nverts=7, parts=("eye", "mouth")):
    rng = np.random.default_rng(9)
    placements = {}
    for i, pid in enumerate(parts):
        m = np.eye(3)
        m[0, 2] = 3.0 + i
        placements[pid] = m
    return FramePacket(
        frame_index=42,
        view_side="right",
        variant_key="lr",
        texture_side="back",
        vertices=rng.normal(size=(nverts, 2)) * 100,
        placements=placements,
        render_order=list(BONE_LABELS),
        plane_origin=np.array([1.0, 2.0, 3.0]),
        plane_normal=np.array([0.0, 0.0, 1.0]),
        theta=4.2,
        limb_swapped=True,
    )


def test_packet_roundtrip():
    pkt = _packet()
    order = ["eye", "mouth"]
    payload = protocol.encode_packet(pkt, order)
    back = protocol.decode_packet(payload, order)
    assert back.frame_index == 42
    assert back.view_side == "right"
    assert back.variant_key == "lr"
    assert back.texture_side == "back"
    assert abs(back.theta - 4.2) < 1e-12
    assert np.allclose(back.vertices, pkt.vertices, atol=1e-3)
    assert np.allclose(back.placements["mouth"], pkt.placements["mouth"], atol=1e-6)
    assert back.render_order == pkt.render_order
    assert np.allclose(back.plane_origin, [1, 2, 3], atol=1e-6)
    assert back.limb_swapped is True


def test_packet_encoding_is_little_endian_sections():
    pkt = _packet(nverts=3, parts=())
    payload = protocol.encode_packet(pkt, [])
    assert payload[0] == protocol.TAG_FRAME
    import struct

    (hlen,) = struct.unpack_from("<I", payload, 1)
    pos = 5 + hlen
    (vlen,) = struct.unpack_from("<I", payload, pos)
    assert vlen == 3 * 2 * 4  # f32 pairs
    verts = np.frombuffer(payload[pos + 4 : pos + 4 + vlen], dtype="<f4")
    assert np.allclose(verts.reshape(-1, 2), pkt.vertices, atol=1e-3)
    pos += 4 + vlen
    (plen,) = struct.unpack_from("<I", payload, pos)
    assert plen == 0
    pos += 4
    (olen,) = struct.unpack_from("<I", payload, pos)
    assert olen == len(BONE_LABELS)  # u8 labels


def test_frame_stream_roundtrip():
    pkt = _packet()
    order = ["eye", "mouth"]
    buf = io.BytesIO()
    for _ in range(3):
        buf.write(protocol.frame_bytes(protocol.encode_packet(pkt, order)))
    buf.seek(0)
    count = 0
    while True:
        payload = protocol.read_frame(buf)
        if payload is None:
            break
        protocol.decode_packet(payload, order)
        count += 1
    assert count == 3


def test_camera_control_error_roundtrip():
    cam = protocol.decode_camera(protocol.encode_camera([1.5, -2.5, 3.5]))
    assert np.allclose(cam, [1.5, -2.5, 3.5])
    code, value = protocol.decode_control(protocol.encode_control(protocol.CONTROL_SEEK, 17))
    assert code == protocol.CONTROL_SEEK and value == 17.0
    ec, msg = protocol.decode_error(protocol.encode_error(3, "boom"))
    assert ec == 3 and msg == "boom"


def test_malformed_messages_rejected():
    with pytest.raises(ProtocolError):
        protocol.decode_packet(bytes([protocol.TAG_HELLO]) + b"xx", [])
    with pytest.raises(ProtocolError):
        protocol.decode_camera(bytes([protocol.TAG_CAMERA]) + b"\x00" * 7)
    with pytest.raises(ProtocolError):
        protocol.read_frame(io.BytesIO(b"\x10\x00\x00\x00abc"))


def test_packet_json_debug_encoding():
    import json

    pkt = _packet()
    doc = json.loads(protocol.packet_to_json(pkt))
    assert doc["frame_index"] == 42
    assert doc["view_side"] == "right"
    assert len(doc["vertices"]) == 7


def test_hello_roundtrip(small_rig):
    payload = protocol.encode_hello(small_rig, clip_frames=120, frame_time=1 / 30)
    manifest, blob = protocol.decode_hello(payload)
    assert manifest["clip"]["frames"] == 120
    assert manifest["bone_labels"] == list(BONE_LABELS)
    view = manifest["views"]["left"]
    key = small_rig.authored_variant
    seg = view["meshes"][key]["vertices"]
    verts = np.frombuffer(blob[seg[0] : seg[0] + seg[1]], dtype="<f4").reshape(-1, 2)
    assert np.allclose(verts, small_rig.view("left").mesh(key).vertices, atol=1e-3)
    # textures decode as PNG
    from PIL import Image

    tseg = view["textures"][key]["front"]
    img = Image.open(io.BytesIO(blob[tseg[0] : tseg[0] + tseg[1]]))
    assert img.size == tuple(small_rig.canvas_size)
    # version mismatch rejected
    bad = payload.replace(b'"version": 1', b'"version": 9', 1)
    with pytest.raises(ProtocolError):
        protocol.decode_hello(bad)
