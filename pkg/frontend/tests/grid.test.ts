// Cell-center geometry must match the toolkit's lattice exactly; the
// fixture is generated by its `grid-centers` command.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { allCentersPx, cellCenterPx, cellPx } from "../src/grid.js";

const fixture = JSON.parse(
  readFileSync(new URL("./fixtures/grid_centers_n11_px528.json", import.meta.url), "utf8"),
);

describe("grid geometry", () => {
  it("matches the shared test vector file exactly", () => {
    const grid = { n: fixture.n, image_px: fixture.image_px };
    const centers = allCentersPx(grid);
    expect(centers.length).toBe(fixture.centers.length);
    for (let idx = 0; idx < centers.length; idx++) {
      expect(centers[idx][0]).toBe(fixture.centers[idx][0]);
      expect(centers[idx][1]).toBe(fixture.centers[idx][1]);
    }
    expect(cellPx(grid)).toBe(fixture.cell_px);
  });

  it("places a single cell center at the cell midpoint", () => {
    expect(cellCenterPx({ n: 3, image_px: 9 }, [0, 0])).toEqual([1.5, 1.5]);
    expect(cellCenterPx({ n: 3, image_px: 9 }, [2, 1])).toEqual([7.5, 4.5]);
  });

  it("rejects indivisible image sizes", () => {
    expect(() => cellPx({ n: 11, image_px: 512 })).toThrow(/divisible/);
  });
});
