/** Entry point: load the protocol config, run the session, emit the file.
 * The session is also saved to localStorage after every block (autosave)
 * and on completion, so an interrupted run leaves a recoverable record. */

import { CanvasDisplay, KeyboardInput, RafClock, downloadSession, postSession } from "./dom.js";
import { runSession } from "./session.js";
import type { ProtocolConfig, SessionDoc } from "./types.js";

async function loadConfig(): Promise<ProtocolConfig> {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("config") ?? "protocol.json";
  const res = await fetch(url);
  if (!res.ok) throw new Error(`cannot load config ${url}: HTTP ${res.status}`);
  return (await res.json()) as ProtocolConfig;
}

function autosave(doc: SessionDoc): void {
  try {
    localStorage.setItem(
      `pairseg-session-${doc.participant_id}`,
      JSON.stringify(doc),
    );
  } catch {
    // storage may be unavailable; the final download still happens
  }
}

async function main(): Promise<void> {
  const cfg = await loadConfig();
  const canvas = document.getElementById("stage") as HTMLCanvasElement;
  const overlay = document.getElementById("overlay") as HTMLElement;
  const display = new CanvasDisplay(canvas, overlay);
  const input = new KeyboardInput();
  const clock = new RafClock();

  const doc = await runSession(cfg, clock, display, input, autosave);
  autosave(doc);
  const filename = `session_${cfg.participant_id}_${cfg.image_id}.json`;
  if (cfg.post_url) {
    try {
      await postSession(doc, cfg.post_url);
    } catch (err) {
      console.error(err);
      downloadSession(doc, filename); // fall back so no data is lost
    }
  } else {
    downloadSession(doc, filename);
  }
  overlay.textContent = "Done. Thank you!";
  overlay.style.display = "block";
}

main().catch((err) => {
  const overlay = document.getElementById("overlay");
  if (overlay) {
    overlay.textContent = `Error: ${err}`;
    (overlay as HTMLElement).style.display = "block";
  }
  console.error(err);
});
