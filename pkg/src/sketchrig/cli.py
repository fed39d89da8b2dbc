"""Command-line entry points: validate, build, retarget, render, serve.

Exit codes: 0 success, 1 validation findings, 2 IO/usage/parse errors.
The log level comes from the ``SKETCHRIG_LOG`` environment variable.
"""

import json
import logging
import math
import os
import sys

import click
import numpy as np

from . import annotation, motion, pipeline, protocol
from .errors import SketchrigError
from .retarget import RetargetConfig

log = logging.getLogger("sketchrig")


def _setup_logging():
    level = os.environ.get("SKETCHRIG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_config(path):
    if path is None:
        return RetargetConfig()
    return RetargetConfig.load(path)


def parse_camera_spec(spec):
    """'fixed:x,y,z', 'orbit:radius,height,omega[,phase]', or a JSON path."""
    if spec is None:
        return motion.CameraTrack.fixed([0.0, 1.0, 400.0])
    if spec.startswith("fixed:"):
        vals = [float(v) for v in spec[6:].split(",")]
        if len(vals) != 3:
            raise click.UsageError("fixed camera needs x,y,z")
        return motion.CameraTrack.fixed(vals)
    if spec.startswith("orbit:"):
        vals = [float(v) for v in spec[6:].split(",")]
        if len(vals) not in (3, 4):
            raise click.UsageError("orbit camera needs radius,height,omega[,phase]")
        return motion.CameraTrack.orbit(*vals)
    with open(spec, "r", encoding="utf-8") as fh:
        return motion.CameraTrack.from_doc(json.load(fh))


def _apply_ablations(cfg, ablate):
    for name in ablate:
        if name == "view_dependence":
            cfg.view_dependence = False
        elif name == "limb_swap":
            cfg.limb_swap = False
        elif name == "plane_opt":
            cfg.plane_opt = False
        else:
            raise click.UsageError(f"unknown ablation '{name}'")
    return cfg


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Retarget config JSON.")
@click.option("--seed-independent", is_flag=True, default=False,
              help="Assert the pipeline uses no RNG (it never does).")
@click.pass_context
def main(ctx, config_path, seed_independent):
    _setup_logging()
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    if seed_independent:
        click.echo("seed-independent: no RNG is used anywhere in the pipeline")


@main.command()
@click.argument("annotations", type=click.Path())
@click.pass_context
def validate(ctx, annotations):
    """Validate an annotation document; exit 1 on findings."""
    try:
        aset, _ = annotation.load_annotations(annotations)
    except FileNotFoundError:
        click.echo(f"error: no such file: {annotations}", err=True)
        sys.exit(2)
    except (SketchrigError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    report = annotation.validate(aset)
    for line in report.lines():
        click.echo(line)
    sys.exit(0 if report.ok else 1)


@main.command()
@click.argument("annotations", type=click.Path())
@click.argument("image", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--max-area", type=float, default=None,
              help="Triangle area bound in px^2 (default: from figure size).")
@click.pass_context
def build(ctx, annotations, image, out_dir, max_area):
    """Build a rig bundle from annotations plus the drawing."""
    from . import rig as rig_mod

    try:
        aset, _ = annotation.load_annotations(annotations)
        img = rig_mod.load_image_rgba(image)
        rig = rig_mod.build_rig(aset, img, max_area=max_area)
        rig_mod.save_rig(rig, out_dir)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except SketchrigError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    n_tris = {
        side: {k: len(rig.view(side).mesh(k).triangles)
               for k in rig.view(side).variant_keys}
        for side in ("left", "right")
    }
    click.echo(f"built rig in {rig.build_seconds:.2f}s -> {out_dir}")
    click.echo(f"views: 2, variants: {rig.view('left').variant_keys}, "
               f"triangles: {n_tris}")


def _make_session(ctx, bundle, bvh, camera, cfg, jointmap_path=None):
    from . import rig as rig_mod
    from .service import SessionDescriptor

    jm = motion.JointMap.load(jointmap_path) if jointmap_path else motion.JointMap.default()
    track = parse_camera_spec(camera)
    desc = SessionDescriptor.load(bundle, bvh, track, cfg, jm)
    return desc


@main.command()
@click.argument("bundle", type=click.Path(exists=True))
@click.argument("bvh", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Packet stream output file.")
@click.option("--camera", default=None, help="fixed:x,y,z | orbit:r,h,omega | JSON path")
@click.option("--frames", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["binary", "text"]), default="binary")
@click.option("--ablate", multiple=True,
              type=click.Choice(["view_dependence", "limb_swap", "plane_opt"]))
@click.option("--jointmap", type=click.Path(exists=True), default=None)
@click.pass_context
def retarget(ctx, bundle, bvh, out_path, camera, frames, fmt, ablate, jointmap):
    """Retarget a clip and write the frame-packet stream to a file."""
    cfg = _apply_ablations(_load_config(ctx.obj.get("config_path")), ablate)
    try:
        desc = _make_session(ctx, bundle, bvh, camera, cfg, jointmap)
        sess = desc.new_session()
        with open(out_path, "wb") as fh:
            for packet in sess.run(frames=frames):
                if fmt == "binary":
                    payload = protocol.encode_packet(
                        packet, sess.part_order(packet.view_side))
                    fh.write(protocol.frame_bytes(payload))
                else:
                    fh.write(protocol.packet_to_json(packet).encode("utf-8") + b"\n")
    except SketchrigError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("bundle", type=click.Path(exists=True))
@click.argument("bvh", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--camera", default=None)
@click.option("--frames", type=int, default=None)
@click.option("--background", type=click.Path(exists=True), default=None,
              help="Compose over this canvas-sized RGBA image.")
@click.option("--pan/--no-pan", default=False,
              help="Pan the character by the scaled root motion.")
@click.option("--ablate", multiple=True,
              type=click.Choice(["view_dependence", "limb_swap", "plane_opt"]))
@click.option("--diagnostics", "diag_path", type=click.Path(), default=None,
              help="Write per-frame angle diagnostics JSON.")
@click.option("--jointmap", type=click.Path(exists=True), default=None)
@click.pass_context
def render(ctx, bundle, bvh, out_dir, camera, frames, background, pan, ablate,
           diag_path, jointmap):
    """Render the retargeted clip to frame_%06d.png files."""
    from . import deform
    from . import rig as rig_mod

    cfg = _apply_ablations(_load_config(ctx.obj.get("config_path")), ablate)
    try:
        desc = _make_session(ctx, bundle, bvh, camera, cfg, jointmap)
        sess = desc.new_session()
        os.makedirs(out_dir, exist_ok=True)
        bg = rig_mod.load_image_rgba(background) if background else None
        origin0 = None
        thetas = []
        for packet in sess.run(frames=frames, collect_diagnostics=diag_path is not None):
            if origin0 is None:
                origin0 = packet.plane_origin.copy()
            offset = (0.0, 0.0)
            if pan:
                n = packet.plane_normal
                right = np.array([n[2], -n[0]])
                d = packet.plane_origin - origin0
                offset = (float(np.dot([d[0], d[2]], right)), -float(d[1]))
            img = deform.composite(packet, desc.rig, background=bg, offset=offset)
            rig_mod.save_image_rgba(
                img, os.path.join(out_dir, f"frame_{packet.frame_index:06d}.png"))
            thetas.append(packet.theta)
        if diag_path:
            diag = {
                "frames": [
                    {
                        "frame_index": d.frame_index,
                        "theta": d.theta,
                        "alphas": d.alphas,
                        "delta_alpha": d.delta_alpha,
                        "fallback_bones": d.fallback_bones,
                    }
                    for d in sess.diagnostics
                ],
                "max_abs_delta_alpha": {
                    b: max((abs(d.delta_alpha.get(b, 0.0)) for d in sess.diagnostics),
                           default=0.0)
                    for b in sess.diagnostics[0].alphas
                } if sess.diagnostics else {},
            }
            with open(diag_path, "w", encoding="utf-8") as fh:
                json.dump(diag, fh, indent=1, sort_keys=True)
        qs = sorted({int(t // (math.pi / 2)) % 4 for t in thetas})
        click.echo(f"rendered {len(thetas)} frames; theta quadrants seen: {qs}")
    except SketchrigError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


@main.command()
@click.argument("bundle", type=click.Path(exists=True))
@click.argument("bvh", type=click.Path(exists=True))
@click.option("--bind", default="127.0.0.1:7007", help="host:port")
@click.option("--camera", default=None)
@click.option("--jointmap", type=click.Path(exists=True), default=None)
@click.pass_context
def serve(ctx, bundle, bvh, bind, camera, jointmap):
    """Stream frame packets to connecting viewers."""
    from .service import StreamServer

    cfg = _load_config(ctx.obj.get("config_path"))
    host, _, port = bind.partition(":")
    try:
        desc = _make_session(ctx, bundle, bvh, camera, cfg, jointmap)
        server = StreamServer(desc, host=host or "127.0.0.1", port=int(port or 0))
    except SketchrigError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    click.echo(f"serving on {server.address[0]}:{server.address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
