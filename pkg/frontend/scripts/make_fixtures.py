"""Generate viewer test fixtures from the primary pipeline.

Writes tests/fixtures/: the raw Hello payload, a 20-frame packet stream
from an orbiting camera (covers both views, both texture sides, and foot
variant switches), and the server-side composites as raw RGBA for the
fidelity comparison.

Run from frontend/:  python3 scripts/make_fixtures.py
"""

import json
import math
import os
import struct
import sys

FRONTEND = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
REPO = os.path.dirname(FRONTEND)
sys.path.insert(0, os.path.join(REPO, "src"))
sys.path.insert(0, os.path.join(REPO, "tests"))

import numpy as np  # noqa: E402

from synth import make_figure, tpose_bvh, walk_bvh  # noqa: E402
from sketchrig import annotation, deform, motion, pipeline, protocol  # noqa: E402
from sketchrig import rig as rig_mod  # noqa: E402
from sketchrig.retarget import RetargetConfig  # noqa: E402


def main():
    out_dir = os.path.join(FRONTEND, "tests", "fixtures")
    comp_dir = os.path.join(out_dir, "composites")
    os.makedirs(comp_dir, exist_ok=True)

    img, doc = make_figure(feet=("right", "left"))
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    rig = rig_mod.build_rig(aset, img)
    rig_mod.save_rig(rig, os.path.join(out_dir, "bundle"))
    with open(os.path.join(out_dir, "clip.bvh"), "w", encoding="utf-8") as fh:
        fh.write(walk_bvh(frames=60))
    with open(os.path.join(out_dir, "tpose.bvh"), "w", encoding="utf-8") as fh:
        fh.write(tpose_bvh(frames=60))

    frames = 20
    h, c = motion.parse_bvh(walk_bvh(frames=frames))
    period_s = frames * c.frame_time
    track = motion.CameraTrack.orbit(radius=500.0, height=120.0,
                                     angular_velocity=2 * math.pi / period_s)
    sess = pipeline.RetargetSession(rig, h, c, motion.JointMap.default(), track,
                                    RetargetConfig())

    hello = protocol.encode_hello(rig, c.frame_count, c.frame_time)
    with open(os.path.join(out_dir, "hello.bin"), "wb") as fh:
        fh.write(hello)

    stream = b""
    meta = {"frames": []}
    for packet in sess.run(frames=frames):
        order = sess.part_order(packet.view_side)
        stream += protocol.frame_bytes(protocol.encode_packet(packet, order))
        comp = deform.composite(packet, rig)
        name = f"frame_{packet.frame_index:03d}.bin"
        with open(os.path.join(comp_dir, name), "wb") as fh:
            fh.write(struct.pack("<II", comp.shape[1], comp.shape[0]))
            fh.write(comp.tobytes())
        meta["frames"].append({
            "frame_index": packet.frame_index,
            "view_side": packet.view_side,
            "texture_side": packet.texture_side,
            "variant_key": packet.variant_key,
            "theta": packet.theta,
            "composite": f"composites/{name}",
        })
    with open(os.path.join(out_dir, "packets.stream"), "wb") as fh:
        fh.write(stream)
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    sides = {f["view_side"] for f in meta["frames"]}
    texes = {f["texture_side"] for f in meta["frames"]}
    print(f"wrote {frames} packets: views {sorted(sides)}, textures {sorted(texes)}")


if __name__ == "__main__":
    main()
