/**
 * Viewer session: a message transport plus decoded rig assets and the
 * latest frame.  Transports deliver one protocol frame per message (the
 * WebSocket transport in the browser; tests drive a TCP transport with
 * the same bytes).  Dropped connections reconnect and resume at the last
 * seen frame.
 */

import { buildAssets, PngDecoder, RigAssets } from "./assets.js";
import {
  CONTROL_PAUSE,
  CONTROL_SEEK,
  CONTROL_TOGGLE_LIMB_SWAP,
  CONTROL_TOGGLE_PLANE_OPT,
  CONTROL_TOGGLE_VIEW_DEPENDENCE,
  FramePacket,
  ProtocolError,
  TAG_ERROR,
  TAG_FRAME,
  TAG_HELLO,
  decodeError,
  decodeFrame,
  decodeHello,
  encodeCamera,
  encodeControl,
  frameBytes,
} from "./protocol.js";

export interface Transport {
  send(frame: Uint8Array): void;   // one whole length-prefixed frame
  onMessage(cb: (payload: Uint8Array) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export type TransportFactory = () => Promise<Transport>;

/** Browser transport: one wire frame per WebSocket binary message. */
export class WsTransport implements Transport {
  private ws: WebSocket;
  private messageCb: ((p: Uint8Array) => void) | null = null;
  private closeCb: (() => void) | null = null;

  private constructor(ws: WebSocket) {
    this.ws = ws;
    ws.binaryType = "arraybuffer";
    ws.onmessage = (ev) => {
      const data = new Uint8Array(ev.data as ArrayBuffer);
      if (data.length < 4) return;
      const len = new DataView(data.buffer).getUint32(0, true);
      if (4 + len !== data.length) return;
      this.messageCb?.(data.subarray(4));
    };
    ws.onclose = () => this.closeCb?.();
  }

  static connect(url: string): Promise<WsTransport> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(url);
      ws.onopen = () => resolve(new WsTransport(ws));
      ws.onerror = () => reject(new Error(`cannot reach ${url}`));
    });
  }

  send(frame: Uint8Array): void {
    this.ws.send(frame);
  }

  onMessage(cb: (p: Uint8Array) => void): void {
    this.messageCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.ws.onclose = null;
    this.ws.close();
  }
}

export interface SessionOptions {
  reconnect?: boolean;
  onError?: (message: string) => void;
}

export class ViewerSession {
  assets!: RigAssets;
  latestPacket: FramePacket | null = null;
  lastFrameIndex = 0;
  toggles = { view_dependence: true, limb_swap: true, plane_opt: true };
  paused = false;
  onFrame: ((p: FramePacket) => void) | null = null;

  private transport!: Transport;
  private closedByUser = false;

  private constructor(
    private factory: TransportFactory,
    private decodePng: PngDecoder,
    private opts: SessionOptions,
  ) {}

  static async connect(
    factory: TransportFactory,
    decodePng: PngDecoder,
    opts: SessionOptions = {},
  ): Promise<ViewerSession> {
    const s = new ViewerSession(factory, decodePng, opts);
    await s.dial(null);
    return s;
  }

  private partCount(side: "left" | "right"): number {
    return this.assets ? this.assets.views[side].parts.length : 0;
  }

  private async dial(resumeAt: number | null): Promise<void> {
    const transport = await this.factory();
    this.transport = transport;

    const hello: Uint8Array = await new Promise((resolve, reject) => {
      transport.onMessage((payload) => resolve(payload));
      transport.onClose(() => reject(new Error("closed before hello")));
    });
    if (hello[0] !== TAG_HELLO) throw new ProtocolError("expected hello first");
    this.assets = await buildAssets(decodeHelloSafe(hello, this.opts), this.decodePng);

    transport.onMessage((payload) => this.handle(payload));
    transport.onClose(() => {
      if (!this.closedByUser && this.opts.reconnect) {
        void this.reconnect();
      }
    });

    if (resumeAt !== null) {
      this.seek(resumeAt);
      if (this.paused) this.setPaused(true);
    }
  }

  async reconnect(): Promise<void> {
    await this.dial(this.lastFrameIndex);
  }

  private handle(payload: Uint8Array): void {
    if (payload.length === 0) return;
    if (payload[0] === TAG_FRAME) {
      // decode with the part count of whichever view the header names
      const side = payload[5 + 12] === 0 ? "left" : "right";
      const pkt = decodeFrame(payload, this.partCount(side));
      this.latestPacket = pkt;
      this.lastFrameIndex = pkt.frameIndex;
      this.onFrame?.(pkt);
    } else if (payload[0] === TAG_ERROR) {
      const { message } = decodeError(payload);
      this.opts.onError?.(message);
    }
  }

  sendCamera(position: [number, number, number]): void {
    this.transport.send(frameBytes(encodeCamera(position[0], position[1], position[2])));
  }

  setPaused(on: boolean): void {
    this.paused = on;
    this.transport.send(frameBytes(encodeControl(CONTROL_PAUSE, on ? 1 : 0)));
  }

  seek(frame: number): void {
    this.transport.send(frameBytes(encodeControl(CONTROL_SEEK, frame)));
  }

  setToggle(name: keyof ViewerSession["toggles"], on: boolean): void {
    this.toggles[name] = on;
    const code = {
      view_dependence: CONTROL_TOGGLE_VIEW_DEPENDENCE,
      limb_swap: CONTROL_TOGGLE_LIMB_SWAP,
      plane_opt: CONTROL_TOGGLE_PLANE_OPT,
    }[name];
    this.transport.send(frameBytes(encodeControl(code, on ? 1 : 0)));
  }

  close(): void {
    this.closedByUser = true;
    this.transport.close();
  }
}

function decodeHelloSafe(payload: Uint8Array, opts: SessionOptions) {
  try {
    return decodeHello(payload);
  } catch (err) {
    opts.onError?.((err as Error).message);
    throw err;
  }
}
