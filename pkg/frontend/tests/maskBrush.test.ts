import { describe, expect, it } from "vitest";

import {
  applyRectangle,
  applyStroke,
  emptyMask,
  fullMask,
  maskedFraction,
} from "../src/maskBrush";

describe("mask tools", () => {
  it("full-canvas fill gives an all-ones mask", () => {
    const mask = applyRectangle(emptyMask(16, 16), 0, 0, 15, 15);
    expect(maskedFraction(mask)).toBe(1);
  });

  it("stroke then erasing the same stroke leaves an empty mask", () => {
    const points = [
      { x: 4, y: 4 },
      { x: 8, y: 6 },
      { x: 12, y: 12 },
    ];
    const drawn = applyStroke(emptyMask(16, 16), points, 3);
    expect(maskedFraction(drawn)).toBeGreaterThan(0);
    const erased = applyStroke(drawn, points, 3, true);
    expect(maskedFraction(erased)).toBe(0);
  });

  it("strokes clamp at canvas borders", () => {
    const mask = applyStroke(emptyMask(8, 8), [{ x: 0, y: 0 }], 5);
    expect(mask.data[0]).toBe(1);
    expect(maskedFraction(mask)).toBeLessThan(1);
  });

  it("rectangle erase carves from a full mask", () => {
    const mask = applyRectangle(fullMask(8, 8), 2, 2, 5, 5, true);
    expect(mask.data[0]).toBe(1);
    expect(mask.data[3 * 8 + 3]).toBe(0);
  });

  it("tools return new arrays, leaving the input untouched", () => {
    const base = emptyMask(8, 8);
    applyStroke(base, [{ x: 4, y: 4 }], 2);
    expect(maskedFraction(base)).toBe(0);
  });
});
