// Browser PNG codec backed by the canvas API (same interface as the
// node/pngjs codec used in tests).
import type { MaskGrid, PngCodec, RgbImage } from "./types";

function canvasOf(width: number, height: number): [HTMLCanvasElement, CanvasRenderingContext2D] {
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  return [canvas, ctx];
}

function dataUrlToB64(url: string): string {
  return url.slice(url.indexOf(",") + 1);
}

function decodePng(b64: string): ImageData {
  const img = new Image();
  img.src = `data:image/png;base64,${b64}`;
  // decode synchronously via an intermediate canvas once loaded; callers in
  // the app path always pass images that are already loaded blobs, so this
  // uses the synchronous drawImage path
  const [, ctx] = canvasOf(img.naturalWidth || img.width, img.naturalHeight || img.height);
  ctx.drawImage(img, 0, 0);
  return ctx.getImageData(0, 0, img.naturalWidth || img.width, img.naturalHeight || img.height);
}

export const canvasPngCodec: PngCodec = {
  encodeRgb(image: RgbImage): string {
    const [canvas, ctx] = canvasOf(image.width, image.height);
    const imageData = ctx.createImageData(image.width, image.height);
    for (let i = 0; i < image.width * image.height; i++) {
      imageData.data[i * 4] = image.data[i * 3];
      imageData.data[i * 4 + 1] = image.data[i * 3 + 1];
      imageData.data[i * 4 + 2] = image.data[i * 3 + 2];
      imageData.data[i * 4 + 3] = 255;
    }
    ctx.putImageData(imageData, 0, 0);
    return dataUrlToB64(canvas.toDataURL("image/png"));
  },

  decodeRgb(b64: string): RgbImage {
    const imageData = decodePng(b64);
    const data = new Uint8ClampedArray(imageData.width * imageData.height * 3);
    for (let i = 0; i < imageData.width * imageData.height; i++) {
      data[i * 3] = imageData.data[i * 4];
      data[i * 3 + 1] = imageData.data[i * 4 + 1];
      data[i * 3 + 2] = imageData.data[i * 4 + 2];
    }
    return { width: imageData.width, height: imageData.height, data };
  },

  encodeMask(mask: MaskGrid): string {
    const [canvas, ctx] = canvasOf(mask.width, mask.height);
    const imageData = ctx.createImageData(mask.width, mask.height);
    for (let i = 0; i < mask.width * mask.height; i++) {
      const v = mask.data[i] ? 255 : 0;
      imageData.data[i * 4] = v;
      imageData.data[i * 4 + 1] = v;
      imageData.data[i * 4 + 2] = v;
      imageData.data[i * 4 + 3] = 255;
    }
    ctx.putImageData(imageData, 0, 0);
    return dataUrlToB64(canvas.toDataURL("image/png"));
  },

  decodeMask(b64: string): MaskGrid {
    const imageData = decodePng(b64);
    const data = new Uint8Array(imageData.width * imageData.height);
    for (let i = 0; i < imageData.width * imageData.height; i++) {
      data[i] = imageData.data[i * 4] >= 128 ? 1 : 0;
    }
    return { width: imageData.width, height: imageData.height, data };
  },
};
