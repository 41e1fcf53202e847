/** Stick-figure rendering of the 13 bone edges onto a 2D canvas context.
 *
 * Works on any context exposing the small subset of CanvasRenderingContext2D
 * used here, which keeps it testable without a DOM.
 */

import { BONE_EDGES, Joints } from "./types.js";

export interface StickContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface DrawOptions {
  color?: string;
  jointRadius?: number;
  lineWidth?: number;
  /** Flip y for y-up coordinate payloads (reference poses). */
  flipY?: boolean;
}

/** Map joints into a [0,width]x[0,height] box, preserving aspect ratio. */
export function fitTransform(
  joints: Joints,
  width: number,
  height: number,
  flipY = false,
): (p: [number, number]) => [number, number] {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const j of joints) {
    if (j) {
      xs.push(j[0]);
      ys.push(j[1]);
    }
  }
  if (xs.length === 0) return (p) => p;
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const margin = 0.1;
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min(
    (width * (1 - 2 * margin)) / spanX,
    (height * (1 - 2 * margin)) / spanY,
  );
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return ([x, y]) => [
    width / 2 + (x - cx) * scale,
    flipY ? height / 2 - (y - cy) * scale : height / 2 + (y - cy) * scale,
  ];
}

export function drawSkeleton(
  ctx: StickContext,
  joints: Joints,
  width: number,
  height: number,
  options: DrawOptions = {},
): void {
  const color = options.color ?? "#4dd0e1";
  const radius = options.jointRadius ?? 3;
  const toCanvas = fitTransform(joints, width, height, options.flipY ?? false);

  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = options.lineWidth ?? 2;

  for (const [a, b] of BONE_EDGES) {
    const ja = joints[a];
    const jb = joints[b];
    if (!ja || !jb) continue;
    const [ax, ay] = toCanvas(ja);
    const [bx, by] = toCanvas(jb);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  for (const j of joints) {
    if (!j) continue;
    const [x, y] = toCanvas(j);
    ctx.beginPath();
    ctx.arc(x, y, radius, 0, Math.PI * 2);
    ctx.fill();
  }
}
