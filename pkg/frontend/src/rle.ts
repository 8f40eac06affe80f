/**
 * Run-length decoding for binary masks.
 *
 * Wire format (matches the backend exactly): {"h", "w", "runs"} with
 * row-major runs alternating starting with a background run; only the
 * leading background run may be zero-length.
 */

export interface Rle {
  h: number;
  w: number;
  runs: number[];
}

/** Decode to a row-major Uint8Array of 0/1, validating the run invariants. */
export function decodeRle(rle: Rle): Uint8Array {
  const total = rle.h * rle.w;
  let sum = 0;
  for (let i = 0; i < rle.runs.length; i++) {
    const run = rle.runs[i];
    if (run < 0) throw new Error(`negative run length at index ${i}`);
    if (run === 0 && i > 0) throw new Error(`zero-length run at index ${i}`);
    sum += run;
  }
  if (sum !== total) {
    throw new Error(`runs sum to ${sum}, expected ${total}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of rle.runs) {
    if (value === 1) out.fill(1, pos, pos + run);
    pos += run;
    value = 1 - value;
  }
  return out;
}

/** Foreground pixel set as "row,col" strings (order-free comparisons). */
export function foregroundPixels(rle: Rle): Set<string> {
  const data = decodeRle(rle);
  const pixels = new Set<string>();
  for (let r = 0; r < rle.h; r++) {
    for (let c = 0; c < rle.w; c++) {
      if (data[r * rle.w + c] === 1) pixels.add(`${r},${c}`);
    }
  }
  return pixels;
}

/** Union several same-sized masks into one 0/1 buffer. */
export function unionMasks(rles: Rle[]): { h: number; w: number; data: Uint8Array } {
  if (rles.length === 0) throw new Error("no masks to union");
  const { h, w } = rles[0];
  const data = new Uint8Array(h * w);
  for (const rle of rles) {
    if (rle.h !== h || rle.w !== w) throw new Error("mask sizes differ");
    const decoded = decodeRle(rle);
    for (let i = 0; i < decoded.length; i++) {
      if (decoded[i] === 1) data[i] = 1;
    }
  }
  return { h, w, data };
}
