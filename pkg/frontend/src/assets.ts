/**
 * Rig assets decoded from the Hello message: meshes, textures, part
 * sprites.  PNG decoding is injected so the browser can use
 * createImageBitmap while tests use a node decoder.
 */

import { HelloMessage } from "./protocol.js";
import { Rgba } from "./raster.js";

export type PngDecoder = (bytes: Uint8Array) => Promise<Rgba>;

export interface MeshAsset {
  vertices: Float32Array;   // interleaved pairs
  triangles: Uint32Array;
  uvpx: Float32Array;       // texel coords, interleaved pairs
  triangleJoint: Uint8Array; // bone label indices per triangle
}

export interface PartAsset {
  id: string;
  translate: string;
  enclosed: boolean;
  hideOnBack: boolean;
  layer: number;
  bboxMin: [number, number];
  sprite: Rgba;
  parentTriangles: Map<string, Uint32Array>;
}

export interface ViewAssets {
  variantKeys: string[];
  meshes: Map<string, MeshAsset>;
  textures: Map<string, Rgba>;   // key: `${variant}/${side}`
  parts: PartAsset[];            // already in layer order
}

export interface RigAssets {
  canvasSize: [number, number];
  boneLabels: string[];
  clipFrames: number;
  frameTime: number;
  views: { left: ViewAssets; right: ViewAssets };
}

type Seg = [number, number];

function slice(blob: Uint8Array, seg: Seg): Uint8Array {
  return blob.subarray(seg[0], seg[0] + seg[1]);
}

function f32(blob: Uint8Array, seg: Seg): Float32Array {
  const b = blob.slice(seg[0], seg[0] + seg[1]);
  return new Float32Array(b.buffer, 0, b.byteLength / 4);
}

function u32(blob: Uint8Array, seg: Seg): Uint32Array {
  const b = blob.slice(seg[0], seg[0] + seg[1]);
  return new Uint32Array(b.buffer, 0, b.byteLength / 4);
}

export async function buildAssets(hello: HelloMessage, decodePng: PngDecoder): Promise<RigAssets> {
  const { manifest, blob } = hello;
  const views: any = {};
  for (const side of ["left", "right"] as const) {
    const vdoc = manifest.views[side];
    const meshes = new Map<string, MeshAsset>();
    const textures = new Map<string, Rgba>();
    for (const key of vdoc.variant_keys as string[]) {
      const m = vdoc.meshes[key];
      meshes.set(key, {
        vertices: f32(blob, m.vertices),
        triangles: u32(blob, m.triangles),
        uvpx: f32(blob, m.uv),
        triangleJoint: slice(blob, m.triangle_joint).slice(),
      });
      const t = vdoc.textures[key];
      textures.set(`${key}/front`, await decodePng(slice(blob, t.front)));
      textures.set(`${key}/back`, await decodePng(slice(blob, t.back)));
    }
    const parts: PartAsset[] = [];
    for (const p of vdoc.parts) {
      const parentTriangles = new Map<string, Uint32Array>();
      for (const [k, seg] of Object.entries(p.parent_triangles)) {
        parentTriangles.set(k, u32(blob, seg as Seg));
      }
      parts.push({
        id: p.id,
        translate: p.translate,
        enclosed: p.enclosed,
        hideOnBack: p.hide_on_back,
        layer: p.layer,
        bboxMin: [p.bbox_min[0], p.bbox_min[1]],
        sprite: await decodePng(slice(blob, p.sprite)),
        parentTriangles,
      });
    }
    views[side] = { variantKeys: vdoc.variant_keys, meshes, textures, parts };
  }
  return {
    canvasSize: [manifest.canvas_size[0], manifest.canvas_size[1]],
    boneLabels: manifest.bone_labels,
    clipFrames: manifest.clip.frames,
    frameTime: manifest.clip.frame_time,
    views,
  };
}
