// Import/export of the collage spec JSON shared with the server and CLI.
import type { CollageSpecJson, EditorLayer, PngCodec } from "./types";

let layerCounter = 0;

export function nextLayerId(): string {
  layerCounter += 1;
  return `layer-${layerCounter}`;
}

export function exportSpec(
  layers: EditorLayer[],
  height: number,
  width: number,
  codec: PngCodec,
): CollageSpecJson {
  if (layers.length === 0) {
    throw new Error("a collage spec needs at least one layer");
  }
  for (const layer of layers) {
    if (layer.image.width !== width || layer.image.height !== height) {
      throw new Error(`layer ${layer.id} does not match the canvas size`);
    }
    if (layer.mask.width !== width || layer.mask.height !== height) {
      throw new Error(`layer ${layer.id} mask does not match the canvas size`);
    }
  }
  return {
    canvas: [3, height, width],
    layers: layers.map((layer) => ({
      image: codec.encodeRgb(layer.image),
      mask: codec.encodeMask(layer.mask),
      z_order: layer.zOrder,
    })),
  };
}

export function importSpec(doc: CollageSpecJson, codec: PngCodec): EditorLayer[] {
  const [channels, height, width] = doc.canvas;
  if (channels !== 3) {
    throw new Error(`expected a 3-channel canvas, got ${channels}`);
  }
  return doc.layers.map((entry, i) => {
    const image = codec.decodeRgb(entry.image);
    const mask = codec.decodeMask(entry.mask);
    if (image.width !== width || image.height !== height) {
      throw new Error(`layer ${i} image does not match the canvas`);
    }
    if (mask.width !== width || mask.height !== height) {
      throw new Error(`layer ${i} mask does not match the canvas`);
    }
    return {
      id: nextLayerId(),
      name: `layer ${i}`,
      image,
      mask,
      zOrder: entry.z_order ?? 0,
    };
  });
}
