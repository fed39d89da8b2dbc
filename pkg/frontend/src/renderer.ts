/**
 * Pure packet renderer: frame packet + rig assets in, RGBA canvas out.
 *
 * The client re-implements no retargeting math.  Triangles are painted
 * grouped by bone label in the packet's render order; translating parts
 * are layered on top (parents first), clipped to their parent's deformed
 * coverage when enclosed and skipped on the back texture when
 * hide-on-back.
 */

import { RigAssets, PartAsset } from "./assets.js";
import { FramePacket, BONE_LABELS } from "./protocol.js";
import { Rgba, makeRgba, paintTriangles, coverage, blitSprite } from "./raster.js";

export function renderPacket(assets: RigAssets, packet: FramePacket): Rgba | null {
  const view = assets.views[packet.viewSide];
  const mesh = view.meshes.get(packet.variantKey);
  const tex = view.textures.get(`${packet.variantKey}/${packet.textureSide}`);
  if (!mesh || !tex) {
    console.warn(`unknown variant '${packet.variantKey}' for ${packet.viewSide} view; skipping frame`);
    return null;
  }
  const [w, h] = assets.canvasSize;
  const out = makeRgba(w, h);

  // group triangles by bone label once per call
  const byLabel = new Map<number, number[]>();
  for (let t = 0; t < mesh.triangleJoint.length; t++) {
    const lbl = mesh.triangleJoint[t];
    let arr = byLabel.get(lbl);
    if (!arr) byLabel.set(lbl, (arr = []));
    arr.push(t);
  }
  for (const label of packet.renderOrder) {
    const idx = BONE_LABELS.indexOf(label as any);
    const tris = byLabel.get(idx);
    if (tris && tris.length) {
      paintTriangles(out, packet.vertices, mesh.triangles, tris, mesh.uvpx, tex);
    }
  }

  for (let pi = 0; pi < view.parts.length; pi++) {
    const part = view.parts[pi];
    if (part.translate === "none") continue;
    if (packet.textureSide === "back" && part.hideOnBack) continue;
    const m = packet.placements.subarray(9 * pi, 9 * pi + 9);
    let clip: Uint8Array | null = null;
    if (part.enclosed) {
      const parentTris = part.parentTriangles.get(packet.variantKey);
      if (parentTris && parentTris.length) {
        clip = coverage(w, h, packet.vertices, mesh.triangles, parentTris);
      }
    }
    // compose with the sprite-origin offset: canvas = placement * T(bboxMin)
    const composed = composeWithOrigin(m, part);
    blitSprite(out, part.sprite, composed, clip);
  }
  return out;
}

function composeWithOrigin(m: Float32Array, part: PartAsset): number[] {
  const [bx, by] = part.bboxMin;
  // rows of placement * translate(bx, by)
  return [
    m[0], m[1], m[0] * bx + m[1] * by + m[2],
    m[3], m[4], m[3] * bx + m[4] * by + m[5],
    m[6], m[7], m[6] * bx + m[7] * by + m[8],
  ];
}
