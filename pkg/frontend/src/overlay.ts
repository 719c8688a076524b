import type { MaskBitmap } from "./types.js";

/**
 * Turn a mask bitmap into overlay RGBA pixels: translucent fill inside the
 * mask, opaque pixels along the boundary so the region reads as outlined.
 * The caller controls the overall strength via the overlay canvas opacity.
 */
export function maskToOverlayPixels(
  mask: MaskBitmap,
  color: [number, number, number],
  fillAlpha = 150,
): Uint8ClampedArray {
  const { width, height, data } = mask;
  const out = new Uint8ClampedArray(width * height * 4);
  const inside = (x: number, y: number) =>
    x >= 0 && x < width && y >= 0 && y < height && data[y * width + x] > 0;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      if (data[i] === 0) continue;
      const boundary =
        !inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1);
      const o = i * 4;
      out[o] = color[0];
      out[o + 1] = color[1];
      out[o + 2] = color[2];
      out[o + 3] = boundary ? 255 : fillAlpha;
    }
  }
  return out;
}

export type MaskDecoder = (base64OrBlob: string | Blob) => Promise<MaskBitmap>;

/**
 * Default decoder: draw the PNG on an offscreen canvas and read it back.
 * Tests swap this out since jsdom has no real canvas.
 */
export const decodeMaskPng: MaskDecoder = (source) => {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => {
      const canvas = document.createElement("canvas");
      canvas.width = img.naturalWidth;
      canvas.height = img.naturalHeight;
      const ctx = canvas.getContext("2d");
      if (!ctx) {
        reject(new Error("2d canvas unavailable"));
        return;
      }
      ctx.drawImage(img, 0, 0);
      const rgba = ctx.getImageData(0, 0, canvas.width, canvas.height).data;
      const data = new Uint8ClampedArray(canvas.width * canvas.height);
      for (let i = 0; i < data.length; i++) data[i] = rgba[i * 4];
      resolve({ width: canvas.width, height: canvas.height, data });
      if (img.src.startsWith("blob:")) URL.revokeObjectURL(img.src);
    };
    img.onerror = () => reject(new Error("mask PNG failed to decode"));
    img.src = typeof source === "string" ? `data:image/png;base64,${source}` : URL.createObjectURL(source);
  });
};

/** Paint overlay pixels onto a canvas sized to the mask's dimensions. */
export function paintOverlay(
  canvas: HTMLCanvasElement,
  mask: MaskBitmap,
  color: [number, number, number],
): void {
  canvas.width = mask.width;
  canvas.height = mask.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const pixels = maskToOverlayPixels(mask, color);
  const image = ctx.createImageData(mask.width, mask.height);
  image.data.set(pixels);
  ctx.putImageData(image, 0, 0);
}
