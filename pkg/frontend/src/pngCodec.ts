// Node-side PNG codec built on pngjs; the browser app swaps in a
// canvas-backed implementation with the same interface.
import { PNG } from "pngjs";

import type { MaskGrid, PngCodec, RgbImage } from "./types";

function toBase64(buf: Buffer): string {
  return buf.toString("base64");
}

function fromBase64(b64: string): Buffer {
  return Buffer.from(b64, "base64");
}

export const nodePngCodec: PngCodec = {
  encodeRgb(image: RgbImage): string {
    const png = new PNG({ width: image.width, height: image.height });
    for (let i = 0; i < image.width * image.height; i++) {
      png.data[i * 4] = image.data[i * 3];
      png.data[i * 4 + 1] = image.data[i * 3 + 1];
      png.data[i * 4 + 2] = image.data[i * 3 + 2];
      png.data[i * 4 + 3] = 255;
    }
    return toBase64(PNG.sync.write(png));
  },

  decodeRgb(b64: string): RgbImage {
    const png = PNG.sync.read(fromBase64(b64));
    const data = new Uint8ClampedArray(png.width * png.height * 3);
    for (let i = 0; i < png.width * png.height; i++) {
      data[i * 3] = png.data[i * 4];
      data[i * 3 + 1] = png.data[i * 4 + 1];
      data[i * 3 + 2] = png.data[i * 4 + 2];
    }
    return { width: png.width, height: png.height, data };
  },

  encodeMask(mask: MaskGrid): string {
    const png = new PNG({ width: mask.width, height: mask.height });
    for (let i = 0; i < mask.width * mask.height; i++) {
      const v = mask.data[i] ? 255 : 0;
      png.data[i * 4] = v;
      png.data[i * 4 + 1] = v;
      png.data[i * 4 + 2] = v;
      png.data[i * 4 + 3] = 255;
    }
    return toBase64(PNG.sync.write(png));
  },

  decodeMask(b64: string): MaskGrid {
    const png = PNG.sync.read(fromBase64(b64));
    const data = new Uint8Array(png.width * png.height);
    for (let i = 0; i < png.width * png.height; i++) {
      data[i] = png.data[i * 4] >= 128 ? 1 : 0;
    }
    return { width: png.width, height: png.height, data };
  },
};
