// End-to-end interop: an emitted session must feed straight into the
// toolkit's `fit` command and yield a valid maps file.

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { runSession } from "../src/session.js";
import type { CoordPair, ProtocolConfig } from "../src/types.js";
import { FakeClock, NullDisplay, ScriptedInput } from "./harness.js";

const pairsFile = JSON.parse(
  readFileSync(new URL("./fixtures/pairs_n11_k2.json", import.meta.url), "utf8"),
);

describe("round trip through the fitting CLI", () => {
  it("emits a session the fit command accepts, producing a valid maps file", async () => {
    const cfg: ProtocolConfig = {
      image_url: "stimulus.png",
      image_id: "roundtrip",
      grid: { n: pairsFile.grid.n, image_px: pairsFile.grid.image_px },
      k_instructed: 2,
      n_blocks: 2,
      pairs: pairsFile.pairs as CoordPair[],
      timing: { preview_ms: 3000, cue_ms: 300, stim_ms: 300 },
      response_keys: { same: "f", different: "j" },
      practice_trials: 0,
      shuffle_seed: 3,
      participant_id: "p-roundtrip",
      collect_contour: false,
    };
    const clock = new FakeClock();
    // alternate responses so the fit sees non-degenerate rates
    const script = Array.from({ length: 600 }, (_, t) => (t % 3 ? "f" : "j"));
    const doc = await runSession(cfg, clock, new NullDisplay(), new ScriptedInput(clock, script));

    const dir = mkdtempSync(join(tmpdir(), "pairseg-client-"));
    const sessionPath = join(dir, "session.json");
    const mapsPath = join(dir, "maps.json");
    writeFileSync(sessionPath, JSON.stringify(doc));
    execFileSync("python3", [
      "-m", "pairseg.cli", "fit", sessionPath,
      "--k", "2", "--max-iter", "300", "--seed", "1",
      "-o", mapsPath,
    ], { stdio: "pipe" });
    const maps = JSON.parse(readFileSync(mapsPath, "utf8"));
    expect(maps.schema_version).toBe(1);
    expect(maps.k).toBe(2);
    expect(maps.grid.n).toBe(11);
    expect(maps.values.length).toBe(2);
    expect(maps.values[0].length).toBe(11);
    // probabilities form a simplex per cell
    for (let r = 0; r < 11; r++) {
      for (let c = 0; c < 11; c++) {
        const total = maps.values[0][r][c] + maps.values[1][r][c];
        expect(Math.abs(total - 1)).toBeLessThan(1e-9);
      }
    }
  }, 60_000);
});
