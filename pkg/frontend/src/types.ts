export interface RgbImage {
  width: number;
  height: number;
  /** RGB bytes, row-major, 3 per pixel. */
  data: Uint8ClampedArray;
}

export interface MaskGrid {
  width: number;
  height: number;
  /** 0 = unknown/inpaint, 1 = known/reconstruct. */
  data: Uint8Array;
}

export interface LayerJson {
  image: string; // base64 PNG
  mask: string; // base64 PNG, single channel 0/255
  z_order: number;
}

export interface CollageSpecJson {
  canvas: [number, number, number]; // [channels, height, width]
  layers: LayerJson[];
}

export interface EditorLayer {
  id: string;
  name: string;
  image: RgbImage;
  mask: MaskGrid;
  zOrder: number;
}

export type Tool = "brush" | "eraser" | "rectangle" | "move" | "reorder";

/** Encoding seam so node tests (pngjs) and the browser (canvas) can differ. */
export interface PngCodec {
  encodeRgb(image: RgbImage): string;
  decodeRgb(b64: string): RgbImage;
  encodeMask(mask: MaskGrid): string;
  decodeMask(b64: string): MaskGrid;
}

export interface ComposeResult {
  compositeB64: string;
  latent: number[][];
  unionMaskB64: string;
  timingMs: number;
}
