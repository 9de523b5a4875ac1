/** Shared record shapes; the session document mirrors the published schema. */

export interface GridShape {
  n: number;
  image_px: number;
}

export interface Timing {
  preview_ms: number;
  cue_ms: number;
  stim_ms: number;
}

/** A tested pair as grid coordinates [col, row]. */
export type Coord = [number, number];
export type CoordPair = [Coord, Coord];

export interface ResponseKeys {
  same: string;
  different: string;
}

export interface ProtocolConfig {
  image_url: string;
  image_id: string;
  grid: GridShape;
  k_instructed: number | null;
  n_blocks: number;
  /** pair list as emitted by the `pairs` CLI command ... */
  pairs?: CoordPair[];
  /** ... or parameters for client-side generation */
  pair_generation?: { k: number; seed: number };
  timing: Timing;
  response_keys: ResponseKeys;
  practice_trials: number;
  shuffle_seed: number;
  participant_id: string;
  collect_contour: boolean;
  /** instruction text; the default placeholder is meant to be edited */
  instructions?: string;
  /** POST target for the finished session; null/absent means download */
  post_url?: string | null;
}

export interface TrialRecord {
  i: Coord;
  j: Coord;
  response: 0 | 1;
  rt_ms: number | null;
  annotations?: string[];
}

export interface BlockRecord {
  block_index: number;
  trials: TrialRecord[];
}

export interface PresentedDurations {
  cue_ms: number;
  stim_ms: number;
}

export interface SessionMeta {
  client: string;
  practice_trials: number;
  block_shuffle_seeds: number[];
  presented: PresentedDurations[];
  preview_presented_ms: number[];
}

export interface SessionDoc {
  schema_version: 1;
  image_id: string;
  grid: GridShape;
  k_instructed: number | null;
  timing: Timing;
  blocks: BlockRecord[];
  contour: Coord[] | null;
  participant_id: string;
  incomplete: boolean;
  meta: SessionMeta;
}

export const DEFAULT_INSTRUCTIONS =
  "In this experiment you will partition an image into segments. A " +
  "partition splits the image into regions; a segment is one such region, " +
  "a part of the image that belongs together (an object, a surface, or a " +
  "texture). On every trial two dots appear. Decide whether the two dots " +
  "lie on the SAME segment or on DIFFERENT segments, then press the " +
  "corresponding key. First look at the image and decide how you would " +
  "partition it."; // placeholder wording, configurable per study
