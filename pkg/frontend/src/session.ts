/** The trial engine.
 *
 * All real-time concerns go through three injected adapters (frame clock,
 * display, input), so the same engine runs under a browser and under the
 * headless test harness. Durations are frame-aligned: each presentation
 * holds until the frame whose timestamp is closest to the nominal
 * duration, and the actually-presented interval is logged.
 */

import { cellCenterPx } from "./grid.js";
import { generatePairs } from "./pairs.js";
import { shuffled } from "./prng.js";
import {
  BlockRecord,
  Coord,
  CoordPair,
  DEFAULT_INSTRUCTIONS,
  PresentedDurations,
  ProtocolConfig,
  SessionDoc,
  TrialRecord,
} from "./types.js";

export interface FrameClock {
  now(): number;
  /** resolves at the next display frame with its timestamp */
  nextFrame(): Promise<number>;
}

export interface DisplayAdapter {
  loadStimulus(url: string): Promise<void>;
  showInstructions(text: string): Promise<void>;
  renderPreview(): void;
  renderCuesOnGray(a: [number, number], b: [number, number]): void;
  renderCuesOnImage(a: [number, number], b: [number, number]): void;
  renderResponsePrompt(): void;
  clear(): void;
  /** freehand contour at session end; null when nothing was drawn */
  collectContour(): Promise<Coord[] | null>;
}

export interface InputAdapter {
  /** resolves on the first press of one of the given keys */
  awaitKey(keys: string[]): Promise<{ key: string; timeMs: number }>;
  /** annotations (e.g. focus loss) accumulated since the last call */
  takeAnnotations(): string[];
}

export class SessionAborted extends Error {}

export function validateConfig(cfg: ProtocolConfig): void {
  const t = cfg.timing;
  if (t.preview_ms <= 0 || t.cue_ms <= 0 || t.stim_ms <= 0) {
    throw new Error("timing values must be positive");
  }
  if (cfg.n_blocks < 1) throw new Error("need at least one block");
  if (!cfg.pairs && !cfg.pair_generation) {
    throw new Error("config needs a pair list or pair_generation parameters");
  }
  if (cfg.pairs && cfg.pairs.length < 1) {
    throw new Error("pair list must not be empty");
  }
  if (cfg.response_keys.same === cfg.response_keys.different) {
    throw new Error("response keys must differ");
  }
}

export function resolvePairs(cfg: ProtocolConfig): CoordPair[] {
  if (cfg.pairs && cfg.pairs.length > 0) return cfg.pairs;
  const gen = cfg.pair_generation!;
  return generatePairs(cfg.grid, gen.k, gen.seed);
}

/** Hold a rendering until the frame closest to `ms`; returns the
 * actually-presented duration. */
export async function presentFor(
  render: () => void,
  ms: number,
  clock: FrameClock,
): Promise<number> {
  const onset = await clock.nextFrame();
  render();
  let shown = onset;
  for (;;) {
    const next = await clock.nextFrame();
    const better =
      Math.abs(next - onset - ms) < Math.abs(shown - onset - ms);
    if (!better && shown > onset) break;
    shown = next;
    if (shown - onset >= ms) break;
  }
  return shown - onset;
}

async function runTrial(
  pair: CoordPair,
  cfg: ProtocolConfig,
  clock: FrameClock,
  display: DisplayAdapter,
  input: InputAdapter,
): Promise<{ record: TrialRecord; presented: PresentedDurations }> {
  const a = cellCenterPx(cfg.grid, pair[0]);
  const b = cellCenterPx(cfg.grid, pair[1]);
  const cueShown = await presentFor(
    () => display.renderCuesOnGray(a, b),
    cfg.timing.cue_ms,
    clock,
  );
  const stimShown = await presentFor(
    () => display.renderCuesOnImage(a, b),
    cfg.timing.stim_ms,
    clock,
  );
  display.renderResponsePrompt();
  const promptAt = clock.now();
  const keys = [cfg.response_keys.same, cfg.response_keys.different];
  const press = await input.awaitKey(keys);
  const annotations = input.takeAnnotations();
  const record: TrialRecord = {
    i: pair[0],
    j: pair[1],
    response: press.key === cfg.response_keys.same ? 1 : 0,
    rt_ms: press.timeMs - promptAt,
  };
  if (annotations.length > 0) record.annotations = annotations;
  return { record, presented: { cue_ms: cueShown, stim_ms: stimShown } };
}

export async function runSession(
  cfg: ProtocolConfig,
  clock: FrameClock,
  display: DisplayAdapter,
  input: InputAdapter,
  onBlockComplete?: (doc: SessionDoc) => void,
): Promise<SessionDoc> {
  validateConfig(cfg);
  const pairs = resolvePairs(cfg);
  const doc: SessionDoc = {
    schema_version: 1,
    image_id: cfg.image_id,
    grid: cfg.grid,
    k_instructed: cfg.k_instructed,
    timing: cfg.timing,
    blocks: [],
    contour: null,
    participant_id: cfg.participant_id,
    incomplete: false,
    meta: {
      client: "pairseg-client/0.1.0",
      practice_trials: Math.min(cfg.practice_trials, pairs.length),
      block_shuffle_seeds: [],
      presented: [],
      preview_presented_ms: [],
    },
  };
  try {
    await display.loadStimulus(cfg.image_url);
    await display.showInstructions(cfg.instructions ?? DEFAULT_INSTRUCTIONS);

    for (let p = 0; p < doc.meta.practice_trials; p++) {
      await runTrial(pairs[p], cfg, clock, display, input); // not recorded
    }

    for (let blockIdx = 0; blockIdx < cfg.n_blocks; blockIdx++) {
      const seed = cfg.shuffle_seed + blockIdx;
      doc.meta.block_shuffle_seeds.push(seed);
      const order = shuffled(pairs, seed);
      const previewShown = await presentFor(
        () => display.renderPreview(),
        cfg.timing.preview_ms,
        clock,
      );
      doc.meta.preview_presented_ms.push(previewShown);
      const block: BlockRecord = { block_index: blockIdx, trials: [] };
      doc.blocks.push(block);
      for (const pair of order) {
        const { record, presented } = await runTrial(
          pair, cfg, clock, display, input,
        );
        block.trials.push(record);
        doc.meta.presented.push(presented);
      }
      onBlockComplete?.(doc);
    }

    if (cfg.collect_contour) {
      doc.contour = await display.collectContour();
    }
    display.clear();
    return doc;
  } catch (err) {
    if (err instanceof SessionAborted) {
      doc.incomplete = true;
      return doc;
    }
    throw err;
  }
}
