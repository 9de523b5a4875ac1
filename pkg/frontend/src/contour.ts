/** Freehand contour capture as a plain state machine over pointer events,
 * so it is drivable both by a canvas and by tests. */

import type { Coord } from "./types.js";

export class ContourCapture {
  private points: Coord[] = [];
  private drawing = false;

  pointerDown(x: number, y: number): void {
    this.drawing = true;
    this.points.push([x, y]);
  }

  pointerMove(x: number, y: number): void {
    if (!this.drawing) return;
    const last = this.points[this.points.length - 1];
    // drop sub-pixel jitter
    if (Math.hypot(x - last[0], y - last[1]) >= 1.0) {
      this.points.push([x, y]);
    }
  }

  pointerUp(): void {
    this.drawing = false;
  }

  clearAll(): void {
    this.points = [];
    this.drawing = false;
  }

  /** Recorded polyline; null when nothing was drawn. */
  result(): Coord[] | null {
    return this.points.length >= 2 ? this.points.slice() : null;
  }

  isClosedLoop(tolPx = 10): boolean {
    if (this.points.length < 3) return false;
    const a = this.points[0];
    const b = this.points[this.points.length - 1];
    return Math.hypot(a[0] - b[0], a[1] - b[1]) <= tolPx;
  }
}
