/**
 * Wire protocol codecs (little-endian), mirroring the service exactly.
 *
 * Every message is `u32 length` + payload (`u8 tag` + body).  Over a
 * WebSocket each binary message carries exactly one such frame, prefix
 * included, so the same splitter works for both transports.
 */

export const PROTOCOL_VERSION = 1;

export const TAG_HELLO = 1;
export const TAG_FRAME = 2;
export const TAG_CAMERA = 3;
export const TAG_CONTROL = 4;
export const TAG_ERROR = 5;

export const CONTROL_PAUSE = 0;
export const CONTROL_SEEK = 1;
export const CONTROL_TOGGLE_VIEW_DEPENDENCE = 2;
export const CONTROL_TOGGLE_LIMB_SWAP = 3;
export const CONTROL_TOGGLE_PLANE_OPT = 4;

/** Bone labels in wire order (u8 render-order indices point here). */
export const BONE_LABELS = [
  "torso", "neck", "head_top",
  "left_shoulder", "left_elbow", "left_hand",
  "right_shoulder", "right_elbow", "right_hand",
  "left_hip", "left_knee", "left_foot",
  "right_hip", "right_knee", "right_foot",
] as const;

export type ViewSide = "left" | "right";
export type TextureSide = "front" | "back";

export interface FramePacket {
  frameIndex: number;
  viewSide: ViewSide;
  variantKey: string;
  textureSide: TextureSide;
  limbSwapped: boolean;
  theta: number;
  planeOrigin: [number, number, number];
  planeNormal: [number, number, number];
  /** interleaved x,y pairs */
  vertices: Float32Array;
  /** row-major 3x3 per part, in the view's part order */
  placements: Float32Array;
  renderOrder: string[];
}

export interface HelloMessage {
  manifest: any;
  blob: Uint8Array;
}

export class ProtocolError extends Error {}

/** Prefix a payload with its u32 length. */
export function frameBytes(payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(4 + payload.length);
  new DataView(out.buffer).setUint32(0, payload.length, true);
  out.set(payload, 4);
  return out;
}

/** Incremental splitter for length-prefixed streams (TCP byte stream). */
export class FrameSplitter {
  private buf = new Uint8Array(0);

  push(chunk: Uint8Array): Uint8Array[] {
    const joined = new Uint8Array(this.buf.length + chunk.length);
    joined.set(this.buf, 0);
    joined.set(chunk, this.buf.length);
    this.buf = joined;
    const out: Uint8Array[] = [];
    for (;;) {
      if (this.buf.length < 4) break;
      const len = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, true);
      if (this.buf.length < 4 + len) break;
      out.push(this.buf.slice(4, 4 + len));
      this.buf = this.buf.slice(4 + len);
    }
    return out;
  }
}

function section(view: DataView, payload: Uint8Array, pos: number): [Uint8Array, number] {
  if (pos + 4 > payload.length) throw new ProtocolError("truncated section length");
  const len = view.getUint32(pos, true);
  pos += 4;
  if (pos + len > payload.length) throw new ProtocolError("truncated section body");
  return [payload.subarray(pos, pos + len), pos + len];
}

export function decodeFrame(payload: Uint8Array, partCount: number): FramePacket {
  if (payload.length === 0 || payload[0] !== TAG_FRAME) {
    throw new ProtocolError("not a frame payload");
  }
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  let pos = 1;
  let header: Uint8Array, verts: Uint8Array, plc: Uint8Array, order: Uint8Array;
  [header, pos] = section(view, payload, pos);
  [verts, pos] = section(view, payload, pos);
  [plc, pos] = section(view, payload, pos);
  [order, pos] = section(view, payload, pos);

  const h = new DataView(header.buffer, header.byteOffset, header.byteLength);
  if (header.length !== 4 + 8 + 1 + 1 + 2 + 1 + 1 + 24) {
    throw new ProtocolError(`bad frame header size ${header.length}`);
  }
  const frameIndex = h.getUint32(0, true);
  const theta = h.getFloat64(4, true);
  const side = h.getUint8(12);
  const tex = h.getUint8(13);
  const variantKey = String.fromCharCode(header[14], header[15]);
  const swapped = h.getUint8(16) !== 0;
  const planeOrigin: [number, number, number] = [
    h.getFloat32(18, true), h.getFloat32(22, true), h.getFloat32(26, true),
  ];
  const planeNormal: [number, number, number] = [
    h.getFloat32(30, true), h.getFloat32(34, true), h.getFloat32(38, true),
  ];
  if (plc.length !== partCount * 36) {
    throw new ProtocolError(`${plc.length / 36} placements for ${partCount} parts`);
  }
  const renderOrder: string[] = [];
  for (const b of order) {
    if (b >= BONE_LABELS.length) throw new ProtocolError("render label out of range");
    renderOrder.push(BONE_LABELS[b]);
  }
  return {
    frameIndex,
    viewSide: side === 0 ? "left" : "right",
    variantKey,
    textureSide: tex === 0 ? "front" : "back",
    limbSwapped: swapped,
    theta,
    planeOrigin,
    planeNormal,
    vertices: new Float32Array(verts.buffer.slice(verts.byteOffset, verts.byteOffset + verts.byteLength)),
    placements: new Float32Array(plc.buffer.slice(plc.byteOffset, plc.byteOffset + plc.byteLength)),
    renderOrder,
  };
}

export function decodeHello(payload: Uint8Array): HelloMessage {
  if (payload.length < 5 || payload[0] !== TAG_HELLO) {
    throw new ProtocolError("not a hello payload");
  }
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  const jlen = view.getUint32(1, true);
  if (5 + jlen > payload.length) throw new ProtocolError("truncated hello manifest");
  const manifest = JSON.parse(new TextDecoder().decode(payload.subarray(5, 5 + jlen)));
  if (manifest.version !== PROTOCOL_VERSION) {
    throw new ProtocolError(`protocol version mismatch: ${manifest.version}`);
  }
  return { manifest, blob: payload.slice(5 + jlen) };
}

export function decodeError(payload: Uint8Array): { code: number; message: string } {
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  return {
    code: view.getUint16(1, true),
    message: new TextDecoder().decode(payload.subarray(3)),
  };
}

export function encodeCamera(x: number, y: number, z: number): Uint8Array {
  const out = new Uint8Array(1 + 24);
  out[0] = TAG_CAMERA;
  const v = new DataView(out.buffer);
  v.setFloat64(1, x, true);
  v.setFloat64(9, y, true);
  v.setFloat64(17, z, true);
  return out;
}

export function encodeControl(code: number, value: number): Uint8Array {
  const out = new Uint8Array(2 + 8);
  out[0] = TAG_CONTROL;
  out[1] = code;
  new DataView(out.buffer).setFloat64(2, value, true);
  return out;
}
