import { describe, expect, it } from "vitest";

import { ContourCapture } from "../src/contour.js";

describe("contour capture", () => {
  it("returns null when nothing is drawn", () => {
    const c = new ContourCapture();
    expect(c.result()).toBeNull();
  });

  it("records a freehand polyline in pixel coordinates", () => {
    const c = new ContourCapture();
    c.pointerDown(10, 0);
    for (let y = 2; y <= 40; y += 2) c.pointerMove(10, y);
    c.pointerUp();
    const pts = c.result()!;
    expect(pts.length).toBeGreaterThan(10);
    expect(pts[0]).toEqual([10, 0]);
    expect(pts[pts.length - 1]).toEqual([10, 40]);
  });

  it("detects a closed loop (first point near last)", () => {
    const c = new ContourCapture();
    c.pointerDown(20, 20);
    const steps = 32;
    for (let t = 1; t <= steps; t++) {
      const a = (2 * Math.PI * t) / steps;
      c.pointerMove(20 + 15 * Math.cos(a) - 15, 20 + 15 * Math.sin(a));
    }
    c.pointerUp();
    expect(c.isClosedLoop()).toBe(true);
  });

  it("ignores moves while the pointer is up and supports clearing", () => {
    const c = new ContourCapture();
    c.pointerMove(5, 5);
    expect(c.result()).toBeNull();
    c.pointerDown(0, 0);
    c.pointerMove(5, 5);
    c.pointerUp();
    c.clearAll();
    expect(c.result()).toBeNull();
  });
});
