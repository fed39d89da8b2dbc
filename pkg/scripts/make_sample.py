"""Regenerate the committed sample assets (figure + annotation bundle + clips).

Run from the repo root:  python3 scripts/make_sample.py
"""

import os
import sys

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "tests"))
sys.path.insert(0, os.path.join(REPO, "src"))

import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from synth import (  # noqa: E402
    arm_sweep_bvh,
    make_figure,
    tpose_bvh,
    walk_bvh,
    walk_toward_camera_bvh,
)
from sketchrig import annotation  # noqa: E402


def main():
    sample_dir = os.path.join(REPO, "assets", "sample")
    clips_dir = os.path.join(REPO, "assets", "clips")
    os.makedirs(sample_dir, exist_ok=True)
    os.makedirs(clips_dir, exist_ok=True)

    img, doc = make_figure(feet=("right", "left"))
    Image.fromarray(img, mode="RGBA").save(os.path.join(sample_dir, "drawing.png"))
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    aset.image_path = "drawing.png"
    annotation.serialize_annotations(aset, sample_dir)

    for name, text in [
        ("walk.bvh", walk_bvh(frames=300)),
        ("walk_advance.bvh", walk_bvh(frames=120, advance=(0.008, 0.0))),
        ("tpose.bvh", tpose_bvh(frames=60)),
        ("arm_sweep.bvh", arm_sweep_bvh()),
        ("walk_toward_camera.bvh", walk_toward_camera_bvh()),
    ]:
        with open(os.path.join(clips_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    print(f"wrote {sample_dir} and {clips_dir}")


if __name__ == "__main__":
    main()
