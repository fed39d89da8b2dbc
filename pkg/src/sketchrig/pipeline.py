"""Session driver: motion in, frame packets out.

One session owns a rig, a parsed clip, a resolved joint map, a camera
track, the retarget config, and the mutable per-frame state.  The service
and the CLI both run frames through here, so their outputs agree
byte-for-byte for the same inputs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import deform, motion, retarget
from .deform import FramePacket


@dataclass
class FrameDiagnostics:
    frame_index: int
    theta: float
    alphas: dict
    delta_alpha: dict
    fallback_bones: list


class RetargetSession:
    def __init__(self, rig, hierarchy, clip, joint_map, camera_track, cfg,
                 initial_root=None):
        self.rig = rig
        self.hierarchy = hierarchy
        self.clip = clip
        self.resolved_map = joint_map.resolve(hierarchy) if hasattr(joint_map, "resolve") else dict(joint_map)
        self.camera_track = camera_track
        self.cfg = cfg
        self.state = retarget.RetargetState()
        if initial_root is None:
            initial_root = np.zeros(2)
        self.state.root_ground = np.asarray(initial_root, dtype=np.float64).copy()
        self.part_frames = {}
        self.diagnostics = []
        self.prev_alphas = None

    @property
    def frame_count(self):
        return self.clip.frame_count

    def _peek_root(self, pose):
        """Where the character root will be after this frame's update."""
        rg = self.state.root_ground
        elev = self.state.elevation
        if self.state.prev_skel_root is not None:
            skel_root = pose[self.resolved_map["root_hip"]]
            ratio = self.rig.leg_length / retarget.skeleton_leg_length(
                pose, self.resolved_map
            )
            vel = skel_root - self.state.prev_skel_root
            rg = rg + motion.ground(vel) * ratio
            elev = elev + float(vel[1]) * ratio
        return rg, elev

    def frame(self, frame_index, camera_override=None, collect_diagnostics=False):
        """Run one frame; returns a FramePacket."""
        pose = motion.forward_kinematics(self.hierarchy, self.clip, frame_index)
        rg, elev = self._peek_root(pose)
        t = frame_index * self.clip.frame_time
        if camera_override is not None:
            camera = np.asarray(camera_override, dtype=np.float64)
        else:
            camera = self.camera_track.at(frame_index, t, rg)
        root3 = np.array([rg[0], 0.0, rg[1]])
        rv = motion.root_view_vector(camera, root3)
        fwd = motion.skeleton_forward(pose, self.resolved_map, self.state.prev_forward)
        self.state.prev_forward = fwd
        theta = motion.view_angle(rv, fwd)

        fp = retarget.retarget_pose(
            pose, self.rig, theta, camera, self.cfg, self.state, self.resolved_map
        )

        view = self.rig.view(fp.view_side)
        arap = self.rig.arap_system(fp.view_side, fp.variant_key)
        rest_root = view.keypoints["root_hip"]
        targets = {}
        for name in motion.CHARACTER_JOINTS:
            p = fp.positions[name]
            targets[name] = np.array([rest_root[0] + p[0], rest_root[1] - p[1]])
        deformed = deform.solve(arap, targets, variant_key=fp.variant_key)
        placements = deform.place_parts(deformed, view, fp.part_transforms,
                                        self.part_frames)

        if collect_diagnostics:
            delta = {}
            if self.prev_alphas is not None:
                for k, a in fp.alphas.items():
                    d = a - self.prev_alphas.get(k, a)
                    d = (d + math.pi) % (2 * math.pi) - math.pi
                    delta[k] = d
            self.diagnostics.append(FrameDiagnostics(
                frame_index=frame_index,
                theta=theta,
                alphas=dict(fp.alphas),
                delta_alpha=delta,
                fallback_bones=list(fp.fallback_bones),
            ))
        self.prev_alphas = dict(fp.alphas)

        return FramePacket(
            frame_index=frame_index,
            view_side=fp.view_side,
            variant_key=fp.variant_key,
            texture_side=fp.texture_side,
            vertices=deformed.positions,
            placements=placements,
            render_order=fp.render_order,
            plane_origin=fp.plane_origin,
            plane_normal=fp.plane_normal,
            theta=theta,
            limb_swapped=fp.limb_swapped,
        )

    def part_order(self, side=None):
        """Wire order of part placements for the given (or active) view."""
        sides = [side] if side else ["left", "right"]
        seen = []
        for s in sides:
            for p in self.rig.view(s).parts_in_layer_order():
                if p.id not in seen:
                    seen.append(p.id)
        return seen

    def run(self, frames=None, collect_diagnostics=False):
        n = self.frame_count if frames is None else min(frames, self.frame_count)
        for i in range(n):
            yield self.frame(i, collect_diagnostics=collect_diagnostics)
