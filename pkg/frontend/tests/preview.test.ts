import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { importSpec } from "../src/collageSpec";
import { fullMask } from "../src/maskBrush";
import { nodePngCodec } from "../src/pngCodec";
import { renderPreview } from "../src/preview";
import type { EditorLayer, RgbImage } from "../src/types";

const fixture = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "overlap.json"), "utf-8"),
);

function flatImage(width: number, height: number, rgb: [number, number, number]): RgbImage {
  const data = new Uint8ClampedArray(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = rgb[0];
    data[i * 3 + 1] = rgb[1];
    data[i * 3 + 2] = rgb[2];
  }
  return { width, height, data };
}

describe("renderPreview", () => {
  it("matches the server's assemble_collage on the overlap fixture", () => {
    const layers = importSpec(fixture.spec, nodePngCodec);
    const [, height, width] = fixture.spec.canvas;
    const { composite, unionMask } = renderPreview(layers, height, width);
    const expectedU8: number[][][] = fixture.expected_composite_u8; // (H, W, 3)
    const expectedUnion: number[][] = fixture.expected_union;
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        expect(unionMask.data[y * width + x]).toBe(expectedUnion[y][x]);
        if (expectedUnion[y][x] === 1) {
          for (let c = 0; c < 3; c++) {
            expect(composite.data[(y * width + x) * 3 + c]).toBe(expectedU8[y][x][c]);
          }
        }
      }
    }
  });

  it("single full layer previews as the source image", () => {
    const img = flatImage(4, 4, [10, 20, 30]);
    const layer: EditorLayer = {
      id: "a",
      name: "a",
      image: img,
      mask: fullMask(4, 4),
      zOrder: 0,
    };
    const { composite, unionMask } = renderPreview([layer], 4, 4);
    expect(Array.from(composite.data)).toEqual(Array.from(img.data));
    expect(unionMask.data.every((v) => v === 1)).toBe(true);
  });

  it("reordering disjoint layers leaves the preview unchanged", () => {
    const left = fullMask(4, 4);
    left.data.fill(0);
    for (let y = 0; y < 4; y++) for (let x = 0; x < 2; x++) left.data[y * 4 + x] = 1;
    const right = fullMask(4, 4);
    right.data.fill(0);
    for (let y = 0; y < 4; y++) for (let x = 2; x < 4; x++) right.data[y * 4 + x] = 1;
    const a: EditorLayer = { id: "a", name: "a", image: flatImage(4, 4, [255, 0, 0]), mask: left, zOrder: 0 };
    const b: EditorLayer = { id: "b", name: "b", image: flatImage(4, 4, [0, 0, 255]), mask: right, zOrder: 1 };
    const first = renderPreview([a, b], 4, 4);
    const swapped = renderPreview(
      [
        { ...a, zOrder: 1 },
        { ...b, zOrder: 0 },
      ],
      4,
      4,
    );
    expect(Array.from(first.composite.data)).toEqual(Array.from(swapped.composite.data));
  });

  it("higher z_order wins overlaps", () => {
    const m = fullMask(2, 2);
    const red: EditorLayer = { id: "r", name: "r", image: flatImage(2, 2, [255, 0, 0]), mask: m, zOrder: 0 };
    const blue: EditorLayer = { id: "b", name: "b", image: flatImage(2, 2, [0, 0, 255]), mask: m, zOrder: 3 };
    const { composite } = renderPreview([red, blue], 2, 2);
    expect(composite.data[2]).toBe(255); // blue channel of first pixel
    expect(composite.data[0]).toBe(0);
  });
});
