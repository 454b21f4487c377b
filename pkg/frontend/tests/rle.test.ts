import { describe, expect, it } from "vitest";

import { decodeRle, maskToRgba, SUBJECT_COLOR } from "../src/rle.js";

describe("decodeRle", () => {
  it("decodes alternating runs starting with zeros", () => {
    // 2x4 mask: row-major [0,0,1,1, 1,0,0,0]
    const bits = decodeRle({ size: [2, 4], counts: [2, 3, 3] });
    expect(Array.from(bits)).toEqual([0, 0, 1, 1, 1, 0, 0, 0]);
  });

  it("handles an all-zero leading count for masks starting with ones", () => {
    const bits = decodeRle({ size: [1, 3], counts: [0, 2, 1] });
    expect(Array.from(bits)).toEqual([1, 1, 0]);
  });

  it("rejects counts that do not sum to the mask size", () => {
    expect(() => decodeRle({ size: [2, 2], counts: [1, 1] })).toThrow(/sum/);
  });

  it("rejects counts that overflow the mask", () => {
    expect(() => decodeRle({ size: [1, 2], counts: [1, 5] })).toThrow(/exceed/);
  });
});

describe("maskToRgba", () => {
  it("colors only the foreground pixels", () => {
    const rgba = maskToRgba(new Uint8Array([0, 1]), SUBJECT_COLOR);
    expect(Array.from(rgba.slice(0, 4))).toEqual([0, 0, 0, 0]);
    expect(Array.from(rgba.slice(4, 8))).toEqual([
      SUBJECT_COLOR.r,
      SUBJECT_COLOR.g,
      SUBJECT_COLOR.b,
      SUBJECT_COLOR.a,
    ]);
  });
});
