/**
 * Pixel-faithful mask overlay: each mask painted at image resolution on a
 * canvas layer, nearest-neighbor upscaled by CSS so reviewers can judge
 * boundary quality. Opacity is adjustable, visibility toggles with `M`.
 *
 * Image construction is pure (`buildOverlayImage`) so the exact painted
 * pixel set is testable without a canvas implementation.
 */

import type { Rle } from "./rle.js";
import { decodeRle } from "./rle.js";

const MASK_COLORS: [number, number, number][] = [
  [251, 146, 60], // orange
  [59, 130, 246], // blue
  [34, 197, 94], // green
  [168, 85, 247], // purple
  [236, 72, 153], // pink
  [6, 182, 212], // cyan
];

export interface OverlayImage {
  w: number;
  h: number;
  rgba: Uint8ClampedArray; // row-major RGBA, alpha 255 on mask pixels
}

export function buildOverlayImage(masks: Rle[]): OverlayImage {
  if (masks.length === 0) return { w: 0, h: 0, rgba: new Uint8ClampedArray(0) };
  const { h, w } = masks[0];
  const rgba = new Uint8ClampedArray(w * h * 4);
  masks.forEach((rle, index) => {
    if (rle.h !== h || rle.w !== w) {
      throw new Error("all overlay masks must share the image grid");
    }
    const data = decodeRle(rle);
    const [r, g, b] = MASK_COLORS[index % MASK_COLORS.length];
    for (let i = 0; i < data.length; i++) {
      if (data[i] === 1) {
        rgba[i * 4] = r;
        rgba[i * 4 + 1] = g;
        rgba[i * 4 + 2] = b;
        rgba[i * 4 + 3] = 255;
      }
    }
  });
  return { w, h, rgba };
}

/** Opaque pixels of an overlay image, as "row,col" strings. */
export function paintedPixels(image: OverlayImage): Set<string> {
  const pixels = new Set<string>();
  for (let r = 0; r < image.h; r++) {
    for (let c = 0; c < image.w; c++) {
      if (image.rgba[(r * image.w + c) * 4 + 3] > 0) pixels.add(`${r},${c}`);
    }
  }
  return pixels;
}

/** Paint masks onto the canvas at exact mask resolution. */
export function renderOverlay(canvas: HTMLCanvasElement, masks: Rle[]): void {
  const image = buildOverlayImage(masks);
  canvas.width = image.w;
  canvas.height = image.h;
  const ctx = canvas.getContext("2d");
  if (!ctx || image.w === 0) return;
  const imageData = ctx.createImageData(image.w, image.h);
  imageData.data.set(image.rgba);
  ctx.putImageData(imageData, 0, 0);
}
