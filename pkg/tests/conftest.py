import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from synth import (  # noqa: E402
    make_figure,
    make_plain_figure,
    tpose_bvh,
    walk_bvh,
)

from sketchrig import annotation, motion, rig as rig_mod  # noqa: E402


@pytest.fixture(scope="session")
def small_figure():
    img, doc = make_figure()
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    return img, doc, aset


@pytest.fixture(scope="session")
def plain_figure():
    img, doc = make_plain_figure()
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    return img, doc, aset


@pytest.fixture(scope="session")
def feet_figure():
    img, doc = make_figure(feet=("right", "left"))
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    return img, doc, aset


@pytest.fixture(scope="session")
def small_rig(small_figure):
    img, _, aset = small_figure
    return rig_mod.build_rig(aset, img)


@pytest.fixture(scope="session")
def plain_rig(plain_figure):
    img, _, aset = plain_figure
    return rig_mod.build_rig(aset, img)


@pytest.fixture(scope="session")
def feet_rig(feet_figure):
    img, _, aset = feet_figure
    return rig_mod.build_rig(aset, img)


@pytest.fixture(scope="session")
def walk_clip():
    h, c = motion.parse_bvh(walk_bvh(frames=120))
    return h, c


@pytest.fixture(scope="session")
def tpose_clip():
    return motion.parse_bvh(tpose_bvh(frames=8))


@pytest.fixture(scope="session")
def joint_map():
    return motion.JointMap.default()
