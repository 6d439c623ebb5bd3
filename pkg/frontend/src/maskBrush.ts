// Brush and rectangle tools rasterizing into binary masks.
import type { MaskGrid } from "./types";

export function emptyMask(width: number, height: number): MaskGrid {
  return { width, height, data: new Uint8Array(width * height) };
}

export function fullMask(width: number, height: number): MaskGrid {
  return { width, height, data: new Uint8Array(width * height).fill(1) };
}

export interface StrokePoint {
  x: number;
  y: number;
}

/** Stamp a round brush along a stroke; erase inverts to 0. */
export function applyStroke(
  mask: MaskGrid,
  points: StrokePoint[],
  radius: number,
  erase = false,
): MaskGrid {
  const out: MaskGrid = { ...mask, data: new Uint8Array(mask.data) };
  const value = erase ? 0 : 1;
  const r2 = radius * radius;
  for (const p of points) {
    const x0 = Math.max(0, Math.floor(p.x - radius));
    const x1 = Math.min(mask.width - 1, Math.ceil(p.x + radius));
    const y0 = Math.max(0, Math.floor(p.y - radius));
    const y1 = Math.min(mask.height - 1, Math.ceil(p.y + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - p.x;
        const dy = y - p.y;
        if (dx * dx + dy * dy <= r2) {
          out.data[y * mask.width + x] = value;
        }
      }
    }
  }
  return out;
}

export function applyRectangle(
  mask: MaskGrid,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  erase = false,
): MaskGrid {
  const out: MaskGrid = { ...mask, data: new Uint8Array(mask.data) };
  const value = erase ? 0 : 1;
  const xa = Math.max(0, Math.min(x0, x1));
  const xb = Math.min(mask.width - 1, Math.max(x0, x1));
  const ya = Math.max(0, Math.min(y0, y1));
  const yb = Math.min(mask.height - 1, Math.max(y0, y1));
  for (let y = ya; y <= yb; y++) {
    for (let x = xa; x <= xb; x++) {
      out.data[y * mask.width + x] = value;
    }
  }
  return out;
}

export function maskedFraction(mask: MaskGrid): number {
  let ones = 0;
  for (const v of mask.data) ones += v;
  return ones / mask.data.length;
}
