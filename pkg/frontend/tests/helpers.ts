import { readFileSync, existsSync } from "node:fs";
import { execFileSync } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { PNG } from "pngjs";

import { Rgba } from "../src/raster.js";
import { PngDecoder } from "../src/assets.js";

export const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
export const FRONTEND = dirname(dirname(fileURLToPath(import.meta.url)));

/** Regenerate fixtures from the primary pipeline when absent. */
export function ensureFixtures(): void {
  if (!existsSync(join(FIXTURES, "meta.json"))) {
    execFileSync("python3", [join(FRONTEND, "scripts", "make_fixtures.py")], {
      stdio: "inherit",
    });
  }
}

export const decodePngNode: PngDecoder = async (bytes) => {
  const png = PNG.sync.read(Buffer.from(bytes));
  return {
    width: png.width,
    height: png.height,
    data: new Uint8ClampedArray(png.data.buffer, png.data.byteOffset, png.data.length),
  };
};

export function readRawRgba(path: string): Rgba {
  const buf = readFileSync(path);
  const width = buf.readUInt32LE(0);
  const height = buf.readUInt32LE(4);
  return {
    width,
    height,
    data: new Uint8ClampedArray(buf.buffer, buf.byteOffset + 8, width * height * 4),
  };
}

export function splitStream(buf: Buffer): Uint8Array[] {
  const out: Uint8Array[] = [];
  let pos = 0;
  while (pos + 4 <= buf.length) {
    const len = buf.readUInt32LE(pos);
    out.push(new Uint8Array(buf.buffer, buf.byteOffset + pos + 4, len));
    pos += 4 + len;
  }
  return out;
}

/** Mean SSIM over 8x8 tiles of the luma channel (alpha-composited on white). */
export function ssim(a: Rgba, b: Rgba): number {
  if (a.width !== b.width || a.height !== b.height) return 0;
  const luma = (img: Rgba): Float64Array => {
    const out = new Float64Array(img.width * img.height);
    for (let i = 0; i < out.length; i++) {
      const al = img.data[4 * i + 3] / 255;
      const r = img.data[4 * i] * al + 255 * (1 - al);
      const g = img.data[4 * i + 1] * al + 255 * (1 - al);
      const bl = img.data[4 * i + 2] * al + 255 * (1 - al);
      out[i] = 0.299 * r + 0.587 * g + 0.114 * bl;
    }
    return out;
  };
  const la = luma(a);
  const lb = luma(b);
  const C1 = (0.01 * 255) ** 2;
  const C2 = (0.03 * 255) ** 2;
  let total = 0;
  let count = 0;
  const W = 8;
  for (let y0 = 0; y0 + W <= a.height; y0 += W) {
    for (let x0 = 0; x0 + W <= a.width; x0 += W) {
      let sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (let dy = 0; dy < W; dy++) {
        for (let dx = 0; dx < W; dx++) {
          const va = la[(y0 + dy) * a.width + x0 + dx];
          const vb = lb[(y0 + dy) * a.width + x0 + dx];
          sa += va; sb += vb; saa += va * va; sbb += vb * vb; sab += va * vb;
        }
      }
      const n = W * W;
      const ma = sa / n, mb = sb / n;
      const va = saa / n - ma * ma;
      const vb = sbb / n - mb * mb;
      const cov = sab / n - ma * mb;
      total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
               ((ma * ma + mb * mb + C1) * (va + vb + C2));
      count += 1;
    }
  }
  return count ? total / count : 1;
}
