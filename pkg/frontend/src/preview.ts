// Client-side preview with the same semantics the server applies:
// layers paint back-to-front, the higher z_order wins overlaps, and
// pixels outside the union of part masks stay empty. The preview is a
// preview only — the server composite is the ground truth.
import type { EditorLayer, MaskGrid, RgbImage } from "./types";

export interface Preview {
  composite: RgbImage;
  /** 1 where any layer contributes; pixels at 0 carry no image data. */
  unionMask: MaskGrid;
}

export function renderPreview(layers: EditorLayer[], height: number, width: number): Preview {
  const composite: RgbImage = {
    width,
    height,
    data: new Uint8ClampedArray(width * height * 3),
  };
  const unionMask: MaskGrid = { width, height, data: new Uint8Array(width * height) };
  // stable sort: equal z_order resolves by list position
  const ordered = layers
    .map((layer, index) => ({ layer, index }))
    .sort((a, b) => a.layer.zOrder - b.layer.zOrder || a.index - b.index);
  for (const { layer } of ordered) {
    for (let i = 0; i < width * height; i++) {
      if (layer.mask.data[i]) {
        composite.data[i * 3] = layer.image.data[i * 3];
        composite.data[i * 3 + 1] = layer.image.data[i * 3 + 1];
        composite.data[i * 3 + 2] = layer.image.data[i * 3 + 2];
        unionMask.data[i] = 1;
      }
    }
  }
  return { composite, unionMask };
}
