/**
 * Mask decoding and overlay painting.
 *
 * Masks arrive as uncompressed row-major RLE (counts of 0s and 1s
 * alternating, starting with 0s) and are painted as semi-transparent
 * colored overlays onto a canvas scaled to the displayed image size.
 */

import type { RleMask } from "./api.js";

export interface OverlayColor {
  r: number;
  g: number;
  b: number;
  /** 0..255; two high-contrast hues at 45% opacity are used by the UI */
  a: number;
}

export const SUBJECT_COLOR: OverlayColor = { r: 66, g: 133, b: 244, a: 115 }; // blue
export const OBJECT_COLOR: OverlayColor = { r: 255, g: 109, b: 0, a: 115 }; // orange

/** Decode an RLE mask into a dense 0/1 byte array of length height*width. */
export function decodeRle(mask: RleMask): Uint8Array {
  const [height, width] = mask.size;
  const total = height * width;
  const out = new Uint8Array(total);
  let offset = 0;
  let value = 0;
  for (const count of mask.counts) {
    if (count < 0 || offset + count > total) {
      throw new Error(`RLE counts exceed mask size ${height}x${width}`);
    }
    if (value === 1) {
      out.fill(1, offset, offset + count);
    }
    offset += count;
    value = 1 - value;
  }
  if (offset !== total) {
    throw new Error(`RLE counts sum to ${offset}, expected ${total}`);
  }
  return out;
}

/** Fill an RGBA pixel buffer (4 bytes per pixel) from a decoded mask. */
export function maskToRgba(
  bits: Uint8Array,
  color: OverlayColor,
): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(new ArrayBuffer(bits.length * 4));
  for (let i = 0; i < bits.length; i++) {
    if (bits[i]) {
      const j = i * 4;
      rgba[j] = color.r;
      rgba[j + 1] = color.g;
      rgba[j + 2] = color.b;
      rgba[j + 3] = color.a;
    }
  }
  return rgba;
}

/**
 * Paint one decoded mask onto the target canvas, scaling mask resolution
 * to canvas resolution. No-op when the 2d context is unavailable (e.g.
 * under jsdom in tests); decoding above still validates the payload.
 */
export function paintMask(
  canvas: HTMLCanvasElement,
  mask: RleMask,
  bits: Uint8Array,
  color: OverlayColor,
): void {
  const target = canvas.getContext?.("2d");
  if (!target) {
    return;
  }
  const [height, width] = mask.size;
  const buffer = document.createElement("canvas");
  buffer.width = width;
  buffer.height = height;
  const bufferCtx = buffer.getContext("2d");
  if (!bufferCtx) {
    return;
  }
  bufferCtx.putImageData(new ImageData(maskToRgba(bits, color), width, height), 0, 0);
  target.imageSmoothingEnabled = false;
  target.drawImage(buffer, 0, 0, width, height, 0, 0, canvas.width, canvas.height);
}
