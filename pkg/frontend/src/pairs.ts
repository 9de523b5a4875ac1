/** Client-side pair sampling (anchor scheme: one near-ring partner plus
 * scattered partners per cell), for running without a prepared pair file.
 * Prepared files from the CLI take precedence when provided. */

import { mulberry32, randInt } from "./prng.js";
import type { Coord, CoordPair, GridShape } from "./types.js";

const NEAR_RADIUS = 2;

function key(a: number, b: number): string {
  return a < b ? `${a}:${b}` : `${b}:${a}`;
}

function toCoord(flat: number, n: number): Coord {
  return [flat % n, Math.floor(flat / n)];
}

export function generatePairs(
  grid: GridShape,
  k: number,
  seed: number,
): CoordPair[] {
  const n = grid.n;
  const cells = n * n;
  if (k < 2) throw new Error("need k >= 2");
  if (k * cells > (cells * (cells - 1)) / 2) {
    throw new Error("grid too small for the requested coverage");
  }
  const rand = mulberry32(seed);
  const used = new Set<string>();
  const pairs: CoordPair[] = [];

  const add = (a: number, b: number): boolean => {
    if (a === b || used.has(key(a, b))) return false;
    used.add(key(a, b));
    pairs.push([toCoord(a, n), toCoord(b, n)]);
    return true;
  };

  const nearCandidates = (cell: number): number[] => {
    const row = Math.floor(cell / n);
    const col = cell % n;
    const out: number[] = [];
    for (let dr = -NEAR_RADIUS; dr <= NEAR_RADIUS; dr++) {
      for (let dc = -NEAR_RADIUS; dc <= NEAR_RADIUS; dc++) {
        if (dr === 0 && dc === 0) continue;
        const r = row + dr;
        const c = col + dc;
        if (r >= 0 && r < n && c >= 0 && c < n) out.push(r * n + c);
      }
    }
    return out;
  };

  for (let anchor = 0; anchor < cells; anchor++) {
    const near = nearCandidates(anchor);
    let placed = 0;
    for (let tries = 0; tries < 200 && placed === 0; tries++) {
      if (add(anchor, near[randInt(rand, near.length)])) placed++;
    }
    while (placed < k) {
      const b = randInt(rand, cells);
      if (add(anchor, b)) placed++;
    }
  }
  return pairs;
}
