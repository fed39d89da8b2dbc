/**
 * Browser UI: connect to a stream, orbit the camera by dragging, scrub
 * the timeline, toggle the ablations.  All rendering goes through the
 * software rasterizer and one putImageData per received frame.
 */

import { OrbitCamera, CoalescedSender } from "./camera.js";
import { renderPacket } from "./renderer.js";
import { Rgba } from "./raster.js";
import { ViewerSession, WsTransport } from "./session.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, any> = {}, children: (HTMLElement | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  Object.assign(node, attrs);
  for (const c of children) node.append(c);
  return node;
}

const decodePngBrowser = async (bytes: Uint8Array): Promise<Rgba> => {
  const bitmap = await createImageBitmap(new Blob([bytes.slice()], { type: "image/png" }));
  const off = new OffscreenCanvas(bitmap.width, bitmap.height);
  const ctx = off.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const img = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: img.width, height: img.height, data: img.data };
};

async function start(): Promise<void> {
  const urlInput = el("input", {
    type: "text",
    value: `ws://${location.hostname || "127.0.0.1"}:7007`,
    className: "url",
  });
  const connectBtn = el("button", { textContent: "Connect" });
  const banner = el("div", { className: "banner" });
  const canvas = el("canvas", { width: 640, height: 480 });
  const playBtn = el("button", { textContent: "Pause" });
  const scrubber = el("input", { type: "range", min: "0", max: "0", value: "0" });
  const frameLabel = el("span", { textContent: "0/0" });
  const thetaLabel = el("span", { className: "theta" });

  const toggles: Record<string, HTMLInputElement> = {};
  const toggleBox = el("div", { className: "toggles" });
  for (const name of ["view_dependence", "limb_swap", "plane_opt"] as const) {
    const box = el("input", { type: "checkbox", checked: true });
    toggles[name] = box;
    toggleBox.append(el("label", {}, [box, name.replace("_", " ")]));
  }

  document.body.append(
    el("div", { className: "bar" }, [urlInput, connectBtn, banner]),
    canvas,
    el("div", { className: "bar" }, [playBtn, scrubber, frameLabel, thetaLabel, toggleBox]),
  );

  connectBtn.onclick = async () => {
    banner.textContent = "";
    let session: ViewerSession;
    try {
      session = await ViewerSession.connect(
        () => WsTransport.connect(urlInput.value),
        decodePngBrowser,
        { reconnect: true, onError: (m) => (banner.textContent = m) },
      );
    } catch (err) {
      banner.textContent = `connection failed: ${(err as Error).message}`;
      return;
    }
    const [w, h] = session.assets.canvasSize;
    canvas.width = w;
    canvas.height = h;
    scrubber.max = String(session.assets.clipFrames - 1);
    const ctx = canvas.getContext("2d")!;

    const camera = new OrbitCamera();
    const sender = new CoalescedSender((p) => session.sendCamera(p));

    let dragging = false;
    let lastX = 0, lastY = 0;
    canvas.onpointerdown = (ev) => {
      dragging = true;
      lastX = ev.clientX;
      lastY = ev.clientY;
      canvas.setPointerCapture(ev.pointerId);
    };
    canvas.onpointermove = (ev) => {
      if (!dragging) return;
      camera.dragBy(ev.clientX - lastX, ev.clientY - lastY);
      lastX = ev.clientX;
      lastY = ev.clientY;
      sender.update(camera.position());
    };
    canvas.onpointerup = () => (dragging = false);

    let pendingDraw: Rgba | null = null;
    session.onFrame = (pkt) => {
      const img = renderPacket(session.assets, pkt);
      if (img) pendingDraw = img;
      scrubber.value = String(pkt.frameIndex);
      frameLabel.textContent = `${pkt.frameIndex}/${session.assets.clipFrames - 1}`;
      thetaLabel.textContent =
        `theta ${(pkt.theta / Math.PI).toFixed(2)}pi  view ${pkt.viewSide}` +
        `  tex ${pkt.textureSide}  swap ${pkt.limbSwapped ? "on" : "off"}`;
    };

    const tick = () => {
      sender.tick();
      if (pendingDraw) {
        const pixels = new Uint8ClampedArray(pendingDraw.data);
        ctx.putImageData(
          new ImageData(pixels, pendingDraw.width, pendingDraw.height), 0, 0);
        pendingDraw = null;
      }
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);

    playBtn.onclick = () => {
      session.setPaused(!session.paused);
      playBtn.textContent = session.paused ? "Play" : "Pause";
    };
    scrubber.oninput = () => session.seek(parseInt(scrubber.value, 10));
    for (const [name, box] of Object.entries(toggles)) {
      box.onchange = () => session.setToggle(name as any, box.checked);
    }
  };
}

start();
