/** Grid-cell geometry; must match the toolkit's lattice math exactly
 * (cross-checked against a CLI-generated fixture in the tests). */

import type { Coord, GridShape } from "./types.js";

export function cellPx(grid: GridShape): number {
  if (grid.n < 3) {
    throw new Error(`grid side must be >= 3, got ${grid.n}`);
  }
  if (grid.image_px % grid.n !== 0) {
    throw new Error(
      `image_px=${grid.image_px} is not divisible by n=${grid.n}`,
    );
  }
  return grid.image_px / grid.n;
}

/** Pixel-space center (x, y) of the cell at [col, row]. */
export function cellCenterPx(grid: GridShape, coord: Coord): [number, number] {
  const s = cellPx(grid);
  return [(coord[0] + 0.5) * s, (coord[1] + 0.5) * s];
}

/** All centers in row-major cell order, matching `grid-centers` output. */
export function allCentersPx(grid: GridShape): [number, number][] {
  const out: [number, number][] = [];
  for (let row = 0; row < grid.n; row++) {
    for (let col = 0; col < grid.n; col++) {
      out.push(cellCenterPx(grid, [col, row]));
    }
  }
  return out;
}
