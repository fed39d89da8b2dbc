/**
 * Software rasterizer matching the server's compositor bit-for-bit:
 * pixel-center inside rule, nearest-texel sampling, integer source-over
 * with straight alpha.  Drawing into a plain RGBA buffer keeps the
 * client render pipeline testable off-DOM; the UI blits it with
 * putImageData.
 */

export interface Rgba {
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA, straight alpha
}

export function makeRgba(width: number, height: number): Rgba {
  return { width, height, data: new Uint8ClampedArray(width * height * 4) };
}

function compositePixel(out: Uint8ClampedArray, oi: number, src: Uint8ClampedArray | Uint8Array, si: number): void {
  const sa = src[si + 3];
  if (sa === 0) return;
  if (sa === 255) {
    out[oi] = src[si];
    out[oi + 1] = src[si + 1];
    out[oi + 2] = src[si + 2];
    out[oi + 3] = 255;
    return;
  }
  const da = out[oi + 3];
  const fa = sa + Math.floor((da * (255 - sa)) / 255);
  if (fa === 0) return;
  for (let c = 0; c < 3; c++) {
    const num = src[si + c] * sa * 255 + out[oi + c] * da * (255 - sa);
    const v = Math.floor((num + fa * 127) / (fa * 255));
    out[oi + c] = v > 255 ? 255 : v;
  }
  out[oi + 3] = fa;
}

/**
 * Paint the listed triangles onto `out`, sampling `tex` at the
 * barycentrically interpolated texel coordinates `uvpx`.
 */
export function paintTriangles(
  out: Rgba,
  verts: Float32Array | Float64Array,
  tris: Uint32Array | Int32Array,
  order: ArrayLike<number>,
  uvpx: Float32Array | Float64Array,
  tex: Rgba,
): void {
  const w = out.width, h = out.height;
  const tw = tex.width, th = tex.height;
  for (let oi = 0; oi < order.length; oi++) {
    const t = order[oi];
    const i0 = tris[3 * t], i1 = tris[3 * t + 1], i2 = tris[3 * t + 2];
    const x0 = verts[2 * i0], y0 = verts[2 * i0 + 1];
    const x1 = verts[2 * i1], y1 = verts[2 * i1 + 1];
    const x2 = verts[2 * i2], y2 = verts[2 * i2 + 1];
    const den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
    if (den === 0) continue;
    let xmin = Math.floor(Math.min(x0, x1, x2) - 0.5);
    let xmax = Math.ceil(Math.max(x0, x1, x2) - 0.5);
    let ymin = Math.floor(Math.min(y0, y1, y2) - 0.5);
    let ymax = Math.ceil(Math.max(y0, y1, y2) - 0.5);
    if (xmin < 0) xmin = 0;
    if (ymin < 0) ymin = 0;
    if (xmax > w - 1) xmax = w - 1;
    if (ymax > h - 1) ymax = h - 1;
    const u0x = uvpx[2 * i0], u0y = uvpx[2 * i0 + 1];
    const u1x = uvpx[2 * i1], u1y = uvpx[2 * i1 + 1];
    const u2x = uvpx[2 * i2], u2y = uvpx[2 * i2 + 1];
    for (let iy = ymin; iy <= ymax; iy++) {
      const py = iy + 0.5;
      for (let ix = xmin; ix <= xmax; ix++) {
        const px = ix + 0.5;
        const l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / den;
        const l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / den;
        const l2 = 1 - l0 - l1;
        if (l0 < -1e-9 || l1 < -1e-9 || l2 < -1e-9) continue;
        const sx = l0 * u0x + l1 * u1x + l2 * u2x;
        const sy = l0 * u0y + l1 * u1y + l2 * u2y;
        let tx = Math.floor(sx);
        let ty = Math.floor(sy);
        if (tx < 0) tx = 0;
        if (ty < 0) ty = 0;
        if (tx > tw - 1) tx = tw - 1;
        if (ty > th - 1) ty = th - 1;
        compositePixel(out.data, 4 * (iy * w + ix), tex.data, 4 * (ty * tw + tx));
      }
    }
  }
}

/** Boolean coverage of the listed triangles (pixel-center rule). */
export function coverage(
  width: number,
  height: number,
  verts: Float32Array | Float64Array,
  tris: Uint32Array | Int32Array,
  indices: ArrayLike<number>,
): Uint8Array {
  const cov = new Uint8Array(width * height);
  for (let k = 0; k < indices.length; k++) {
    const t = indices[k];
    const i0 = tris[3 * t], i1 = tris[3 * t + 1], i2 = tris[3 * t + 2];
    const x0 = verts[2 * i0], y0 = verts[2 * i0 + 1];
    const x1 = verts[2 * i1], y1 = verts[2 * i1 + 1];
    const x2 = verts[2 * i2], y2 = verts[2 * i2 + 1];
    const den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
    if (den === 0) continue;
    const xmin = Math.max(0, Math.floor(Math.min(x0, x1, x2) - 0.5));
    const xmax = Math.min(width - 1, Math.ceil(Math.max(x0, x1, x2) - 0.5));
    const ymin = Math.max(0, Math.floor(Math.min(y0, y1, y2) - 0.5));
    const ymax = Math.min(height - 1, Math.ceil(Math.max(y0, y1, y2) - 0.5));
    for (let iy = ymin; iy <= ymax; iy++) {
      const py = iy + 0.5;
      for (let ix = xmin; ix <= xmax; ix++) {
        const px = ix + 0.5;
        const l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / den;
        const l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / den;
        const l2 = 1 - l0 - l1;
        if (l0 >= -1e-9 && l1 >= -1e-9 && l2 >= -1e-9) cov[iy * width + ix] = 1;
      }
    }
  }
  return cov;
}

/**
 * Draw a sprite transformed by the 3x3 matrix (sprite -> canvas pixels),
 * optionally clipped to a coverage mask.
 */
export function blitSprite(
  out: Rgba,
  sprite: Rgba,
  m: ArrayLike<number>, // row-major 3x3
  clip: Uint8Array | null,
): void {
  // invert the affine part
  const a = m[0] as number, b = m[1] as number, tx = m[2] as number;
  const c = m[3] as number, d = m[4] as number, ty = m[5] as number;
  const det = a * d - b * c;
  if (det === 0) return;
  const ia = d / det, ib = -b / det;
  const ic = -c / det, id = a / det;
  const itx = -(ia * tx + ib * ty);
  const ity = -(ic * tx + id * ty);

  const corners: Array<[number, number]> = [
    [0, 0], [sprite.width, 0], [0, sprite.height], [sprite.width, sprite.height],
  ];
  let ox0 = Infinity, oy0 = Infinity, ox1 = -Infinity, oy1 = -Infinity;
  for (const [cx, cy] of corners) {
    const wx = a * cx + b * cy + tx;
    const wy = c * cx + d * cy + ty;
    ox0 = Math.min(ox0, wx); ox1 = Math.max(ox1, wx);
    oy0 = Math.min(oy0, wy); oy1 = Math.max(oy1, wy);
  }
  const x0 = Math.max(0, Math.floor(ox0));
  const y0 = Math.max(0, Math.floor(oy0));
  const x1 = Math.min(out.width, Math.ceil(ox1));
  const y1 = Math.min(out.height, Math.ceil(oy1));
  for (let iy = y0; iy < y1; iy++) {
    const py = iy + 0.5;
    for (let ix = x0; ix < x1; ix++) {
      if (clip && !clip[iy * out.width + ix]) continue;
      const px = ix + 0.5;
      const sx = ia * px + ib * py + itx;
      const sy = ic * px + id * py + ity;
      const jx = Math.floor(sx);
      const jy = Math.floor(sy);
      if (jx < 0 || jy < 0 || jx >= sprite.width || jy >= sprite.height) continue;
      compositePixel(out.data, 4 * (iy * out.width + ix), sprite.data, 4 * (jy * sprite.width + jx));
    }
  }
}
