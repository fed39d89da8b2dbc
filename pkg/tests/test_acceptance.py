"""Acceptance suite: each test exercises one numbered criterion at its
stated tolerance and prints one pass/fail line (run with ``pytest -s``).

The fixtures are all synthetic and deterministic; heavy rigs are built
once per session.
"""

import math
import os
import time

import numpy as np
import pytest

from sketchrig import annotation, deform, motion, pipeline, protocol, raster, retarget
from sketchrig import rig as rig_mod
from sketchrig.retarget import (
    RetargetConfig,
    RetargetState,
    cross_track_distance,
    limb_mapping,
    optimize_projection_plane,
    plane_cost,
    select_view,
    texture_side,
)
from synth import (
    arm_sweep_bvh,
    make_figure,
    make_plain_figure,
    walk_bvh,
    walk_toward_camera_bvh,
)

PI = math.pi


def _verdict(num, ok, detail):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def perf_rig():
    img, doc = make_plain_figure(scale=3)
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    return rig_mod.build_rig(aset, img, max_area=105.0)


def _session(rig, bvh_text, camera=(0.0, 1.0, 500.0), cfg=None):
    h, c = motion.parse_bvh(bvh_text)
    return pipeline.RetargetSession(
        rig, h, c, motion.JointMap.default(),
        motion.CameraTrack.fixed(camera), cfg or RetargetConfig(),
    )


def _max_abs_delta(diag, bone):
    vals = [abs(d.delta_alpha.get(bone, 0.0)) for d in diag if d.delta_alpha]
    return max(vals) if vals else 0.0


def test_criterion_1_performance(perf_rig):
    ntris = len(perf_rig.view("left").mesh("nn").triangles)
    assert ntris >= 3000, f"perf rig has only {ntris} triangles"

    img, doc = make_plain_figure(scale=3)
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    t0 = time.perf_counter()
    rig_mod.build_rig(aset, img, max_area=105.0)
    build_s = time.perf_counter() - t0

    sess = _session(perf_rig, walk_bvh(frames=300), camera=(0.0, 1.0, 2000.0))
    times = []
    for f in range(300):
        t0 = time.perf_counter()
        sess.frame(f)
        times.append(time.perf_counter() - t0)
    times = np.asarray(times) * 1000.0
    med = float(np.median(times))
    p95 = float(np.percentile(times, 95))
    ok = med < 33.0 and p95 < 33.0 and build_s < 10.0
    _verdict(1, ok,
             f"retarget+deform at {ntris} tris: median {med:.1f}ms, p95 {p95:.1f}ms "
             f"(< 33ms); build {build_s:.1f}s (< 10s)")


def test_criterion_2_flailing(perf_rig):
    # oracle first: naive per-frame swing computed straight from the clip
    h, c = motion.parse_bvh(arm_sweep_bvh())
    jm = motion.JointMap.default().resolve(h)
    naive_alpha = []
    for f in range(c.frame_count):
        pose = motion.forward_kinematics(h, c, f)
        V = pose[jm["left_hand"]] - pose[jm["left_elbow"]]
        naive_alpha.append(math.atan2(V[1], V[0]))   # camera plane = xy here
    naive_delta = []
    for a, b in zip(naive_alpha, naive_alpha[1:]):
        d = (b - a + PI) % (2 * PI) - PI
        naive_delta.append(abs(d))
    oracle_max = max(naive_delta)
    assert oracle_max > math.radians(45.0), "fixture oracle must exceed 45 deg/frame"

    results = {}
    for name, opt in (("naive", False), ("opt", True)):
        sess = _session(perf_rig, arm_sweep_bvh(), cfg=RetargetConfig(plane_opt=opt))
        for f in range(sess.frame_count):
            sess.frame(f, collect_diagnostics=True)
        results[name] = _max_abs_delta(sess.diagnostics, "left_hand")
    ok = (results["naive"] > math.radians(45.0)
          and results["opt"] <= 0.3 * results["naive"])
    _verdict(2, ok,
             f"arm sweep max |dAlpha|: naive {math.degrees(results['naive']):.1f} deg "
             f"(> 45), optimized {math.degrees(results['opt']):.1f} deg "
             f"(ratio {results['opt'] / results['naive']:.2f} <= 0.3)")


def test_criterion_3_dampening(perf_rig):
    stds = {}
    for name, opt in (("naive", False), ("opt", True)):
        sess = _session(perf_rig, walk_toward_camera_bvh(),
                        cfg=RetargetConfig(plane_opt=opt))
        for f in range(sess.frame_count):
            sess.frame(f, collect_diagnostics=True)
        alphas = np.array([d.alphas["left_knee"] for d in sess.diagnostics])
        stds[name] = float(alphas.std())
    ok = stds["naive"] <= 1e-9 and stds["opt"] > 0.1
    _verdict(3, ok,
             f"walk-toward-camera knee alpha std: naive {stds['naive']:.2e} "
             f"(= 0 +- 1e-9), optimized {stds['opt']:.3f} rad (> 0.1)")


def test_criterion_4_optimizer_soundness():
    cfg = RetargetConfig()
    rng = np.random.default_rng(20260809)

    def unit(v):
        return v / np.linalg.norm(v)

    grid = retarget.sphere_candidates(10_000)
    worst = 1.0
    shortcut_ok = True
    n_shortcut = 0
    n_opt = 0
    for _ in range(1000):
        v_u = unit(rng.normal(size=3))
        v_l = unit(rng.normal(size=3))
        v_c = unit(rng.normal(size=3))
        v_p = unit(rng.normal(size=3))
        n = optimize_projection_plane(v_u, v_l, v_c, v_p, cfg)
        if cross_track_distance(v_c, v_u, v_l) > cfg.tau:
            n_shortcut += 1
            shortcut_ok &= bool(np.array_equal(n, v_c))
            continue
        n_opt += 1
        c_n = plane_cost(n, v_u, v_l, v_c, v_p, cfg)[0]
        c_star = float(plane_cost(grid, v_u, v_l, v_c, v_p, cfg).min())
        worst = max(worst, c_n / c_star)
    ok = worst <= 1.02 and shortcut_ok and n_opt > 100
    _verdict(4, ok,
             f"{n_opt} optimized instances within {worst:.4f}x of the 1e4-point "
             f"brute-force minimum (<= 1.02x); {n_shortcut} shortcut instances "
             f"returned v_c exactly: {shortcut_ok}")


def test_criterion_5_length_preservation(perf_rig, small_rig):
    worst_rel = 0.0
    checked = 0
    for rig, clips in (
        (small_rig, [walk_bvh(frames=120), arm_sweep_bvh(), walk_toward_camera_bvh()]),
        (perf_rig, [walk_bvh(frames=60)]),
    ):
        for text in clips:
            h, c = motion.parse_bvh(text)
            sess = pipeline.RetargetSession(
                rig, h, c, motion.JointMap.default(),
                motion.CameraTrack.fixed((0.0, 1.0, 500.0)), RetargetConfig(),
            )
            for f in range(c.frame_count):
                pose = motion.forward_kinematics(h, c, f)
                rg, _ = sess._peek_root(pose)
                cam = sess.camera_track.at(f, f * c.frame_time, rg)
                rv = motion.root_view_vector(cam, np.array([rg[0], 0, rg[1]]))
                fwd = motion.skeleton_forward(pose, sess.resolved_map,
                                              sess.state.prev_forward)
                sess.state.prev_forward = fwd
                theta = motion.view_angle(rv, fwd)
                fp = retarget.retarget_pose(pose, rig, theta, cam, sess.cfg,
                                            sess.state, sess.resolved_map)
                for child, parent in retarget.CHARACTER_BONES:
                    L = rig.bone_lengths[child]
                    d = float(np.linalg.norm(fp.positions[child] - fp.positions[parent]))
                    worst_rel = max(worst_rel, abs(d - L) / max(L, 1e-12))
                    checked += 1
    ok = worst_rel <= 1e-9
    _verdict(5, ok,
             f"{checked} bone-frames, worst relative length error "
             f"{worst_rel:.2e} (<= 1e-9)")


def test_criterion_6_arap_checks(small_rig):
    view = small_rig.view("left")
    key = small_rig.authored_variant
    arap = small_rig.arap_system("left", key)
    rest = view.mesh(key).vertices
    handles = view.keypoints

    ident = arap.solve({k: np.asarray(v) for k, v in handles.items()})
    e_ident = float(np.abs(ident - rest).max())

    t = np.array([9.0, -4.0])
    trans = arap.solve({k: np.asarray(v) + t for k, v in handles.items()})
    e_trans = float(np.abs(trans - (rest + t)).max())

    c = rest.mean(axis=0)
    ang = math.radians(30)
    R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    rot = arap.solve({k: R @ (np.asarray(v) - c) + c for k, v in handles.items()})
    e_rot = float(np.abs(rot - ((rest - c) @ R.T + c)).max())

    ok = e_ident < 1e-6 and e_trans < 1e-6 and e_rot < 1e-3
    _verdict(6, ok,
             f"identity {e_ident:.1e} (< 1e-6), translation {e_trans:.1e} (< 1e-6), "
             f"30-degree rigid rotation {e_rot:.1e} px (< 1e-3)")


def test_criterion_7_switching_logic():
    eps = 1e-4
    table_ok = True
    cases = [
        (0.0, "left", True, "back"),
        (PI / 4, "left", True, "back"),
        (PI / 2 - eps, "left", True, "back"),
        (PI / 2 + eps, "left", False, "front"),
        (PI - eps, "left", False, "front"),
        (PI + eps, "right", False, "front"),
        (3 * PI / 2 - eps, "right", False, "front"),
        (3 * PI / 2 + eps, "right", True, "back"),
    ]
    for theta, view, swapped, tex in cases:
        table_ok &= select_view(theta) == view
        table_ok &= limb_mapping(theta) == swapped
        table_ok &= texture_side(theta) == tex

    # hysteresis: +-0.01 rad jitter at each boundary -> at most one switch
    hyst_ok = True
    rng = np.random.default_rng(5)
    for boundary in (0.0, PI / 2, PI, 3 * PI / 2):
        state = RetargetState()
        changes = {"view": 0, "swap": 0, "tex": 0}
        prev = {}
        for k in range(300):
            theta = (boundary + 0.01 * math.sin(0.9 * k)
                     + rng.uniform(-0.002, 0.002)) % (2 * PI)
            cur = {
                "view": select_view(theta, state, 0.05),
                "swap": limb_mapping(theta, state, 0.05),
                "tex": texture_side(theta, state, 0.05),
            }
            for key in cur:
                if key in prev and cur[key] != prev[key]:
                    changes[key] += 1
            prev = cur
        hyst_ok &= all(v <= 1 for v in changes.values())
    ok = table_ok and hyst_ok
    _verdict(7, ok, f"switch table correct: {table_ok}; "
                    f"hysteresis limits switches to <= 1: {hyst_ok}")


def test_criterion_8_model_shape(feet_rig, plain_rig):
    # both feet oriented: exactly 8 unique textured meshes per view
    counts_ok = True
    for side in ("left", "right"):
        view = feet_rig.view(side)
        counts_ok &= sorted(view.variant_keys) == ["ll", "lr", "rl", "rr"]
        counts_ok &= len({(k, s) for k in view.variant_keys
                          for s in ("front", "back")}) == 8

    # no-cue figure: left and right views pixel-identical
    ident_ok = True
    lv, rv = plain_rig.view("left"), plain_rig.view("right")
    for key in lv.variant_keys:
        ident_ok &= bool((lv.masks[key] == rv.masks[key]).all())
        for s in ("front", "back"):
            ident_ok &= bool((lv.texture(key, s) == rv.texture(key, s)).all())

    # mirroring involution bit-exact
    rng = np.random.default_rng(1)
    mask = np.zeros((40, 50), dtype=bool)
    mask[8:30, 10:38] = rng.random((22, 28)) > 0.4
    mask[15, 20] = True
    img = np.zeros((40, 50, 4), dtype=np.uint8)
    img[mask] = rng.integers(1, 255, size=(int(mask.sum()), 4))
    m1, i1 = raster.mirror_horizontal(mask, img, 24)
    m2, i2 = raster.mirror_horizontal(m1, i1, 24)
    invol_ok = bool((m2 == mask).all() and (i2 == img).all())

    ok = counts_ok and ident_ok and invol_ok
    _verdict(8, ok, f"8 textured meshes/view: {counts_ok}; no-cue views "
                    f"pixel-identical: {ident_ok}; mirror involution bit-exact: {invol_ok}")


def test_criterion_9_rest_pose_round_trip(plain_rig, plain_figure):
    img, _, aset = plain_figure
    view = plain_rig.view("left")
    key = plain_rig.authored_variant
    mesh = view.mesh(key)
    packet = deform.FramePacket(
        frame_index=0, view_side="left", variant_key=key, texture_side="front",
        vertices=mesh.vertices.copy(),
        placements={p.id: np.eye(3) for p in view.parts},
        render_order=list(retarget.BONE_LABELS),
        plane_origin=np.zeros(3), plane_normal=np.array([0.0, 0.0, 1.0]), theta=PI,
    )
    out = deform.composite(packet, plain_rig)
    pad = plain_rig.pad
    original = np.pad(img, ((0, 0), (pad, pad), (0, 0)))
    mask = np.pad(aset.figure_mask, ((0, 0), (pad, pad)))
    diff = out[mask].astype(np.float64) - original[mask].astype(np.float64)
    mse = float((diff**2).mean())
    val = math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)
    ok = val > 35.0
    _verdict(9, ok, f"rest render PSNR inside the figure mask: "
                    f"{'inf' if val == math.inf else f'{val:.1f}'} dB (> 35)")


def test_criterion_10_determinism(small_rig, tmp_path):
    from sketchrig.service import SessionDescriptor

    bundle = tmp_path / "bundle"
    rig_mod.save_rig(small_rig, str(bundle))
    clip = walk_bvh(frames=8)
    renders = []
    streams = []
    for run in ("a", "b"):
        rig = rig_mod.load_rig(str(bundle), register_arap=True)
        h, c = motion.parse_bvh(clip)
        sess = pipeline.RetargetSession(
            rig, h, c, motion.JointMap.default(),
            motion.CameraTrack.fixed((0.0, 1.0, 500.0)), RetargetConfig(),
        )
        pngs = []
        blob = b""
        for packet in sess.run():
            img = deform.composite(packet, rig)
            from PIL import Image
            import io as _io

            buf = _io.BytesIO()
            Image.fromarray(img, mode="RGBA").save(buf, format="PNG")
            pngs.append(buf.getvalue())
            blob += protocol.frame_bytes(
                protocol.encode_packet(packet, sess.part_order(packet.view_side))
            )
        renders.append(pngs)
        streams.append(blob)
    ok = renders[0] == renders[1] and streams[0] == streams[1] and len(streams[0]) > 0
    _verdict(10, ok, f"two end-to-end runs: {len(renders[0])} PNGs bit-identical "
                     f"and {len(streams[0])}-byte packet streams byte-identical")
