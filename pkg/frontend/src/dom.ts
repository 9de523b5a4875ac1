/** Browser adapters: canvas rendering, rAF frame clock, keyboard input,
 * focus-loss annotation, contour capture, and file emission. */

import { ContourCapture } from "./contour.js";
import { DisplayAdapter, FrameClock, InputAdapter } from "./session.js";
import type { Coord, SessionDoc } from "./types.js";

const CUE_RADIUS_PX = 5;
const GRAY = "#808080";

export class RafClock implements FrameClock {
  now(): number {
    return performance.now();
  }

  nextFrame(): Promise<number> {
    return new Promise((resolve) => requestAnimationFrame((t) => resolve(t)));
  }
}

export class CanvasDisplay implements DisplayAdapter {
  private ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private overlay: HTMLElement;

  constructor(private canvas: HTMLCanvasElement, overlay: HTMLElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.overlay = overlay;
  }

  async loadStimulus(url: string): Promise<void> {
    const img = new Image();
    img.src = url;
    await img.decode();
    this.image = img;
    this.canvas.width = img.naturalWidth;
    this.canvas.height = img.naturalHeight;
  }

  showInstructions(text: string): Promise<void> {
    this.overlay.textContent = text + "\n\nPress the space bar to begin.";
    this.overlay.style.display = "block";
    return new Promise((resolve) => {
      const onKey = (ev: KeyboardEvent) => {
        if (ev.key === " ") {
          window.removeEventListener("keydown", onKey);
          this.overlay.style.display = "none";
          resolve();
        }
      };
      window.addEventListener("keydown", onKey);
    });
  }

  private fillGray(): void {
    this.ctx.fillStyle = GRAY;
    this.ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
  }

  private drawImage(): void {
    if (this.image) this.ctx.drawImage(this.image, 0, 0);
    else this.fillGray();
  }

  private drawCues(a: [number, number], b: [number, number]): void {
    this.ctx.fillStyle = "red";
    for (const [x, y] of [a, b]) {
      this.ctx.beginPath();
      this.ctx.arc(x, y, CUE_RADIUS_PX, 0, 2 * Math.PI);
      this.ctx.fill();
    }
  }

  renderPreview(): void {
    this.drawImage();
  }

  renderCuesOnGray(a: [number, number], b: [number, number]): void {
    this.fillGray();
    this.drawCues(a, b);
  }

  renderCuesOnImage(a: [number, number], b: [number, number]): void {
    this.drawImage();
    this.drawCues(a, b);
  }

  renderResponsePrompt(): void {
    this.fillGray();
    this.ctx.fillStyle = "black";
    this.ctx.font = "24px sans-serif";
    this.ctx.textAlign = "center";
    this.ctx.fillText(
      "Same segment?",
      this.canvas.width / 2,
      this.canvas.height / 2 - 16,
    );
    this.ctx.fillText(
      "F = same    J = different",
      this.canvas.width / 2,
      this.canvas.height / 2 + 24,
    );
  }

  clear(): void {
    this.fillGray();
  }

  collectContour(): Promise<Coord[] | null> {
    this.drawImage();
    this.ctx.fillStyle = "rgba(255,255,255,0.85)";
    this.ctx.fillRect(0, 0, this.canvas.width, 28);
    this.ctx.fillStyle = "black";
    this.ctx.font = "16px sans-serif";
    this.ctx.textAlign = "left";
    this.ctx.fillText(
      "Draw the boundary between segments, then press Enter (Enter alone skips).",
      8, 19,
    );
    const capture = new ContourCapture();
    const rect = () => this.canvas.getBoundingClientRect();
    const toLocal = (ev: PointerEvent): [number, number] => {
      const r = rect();
      return [
        ((ev.clientX - r.left) / r.width) * this.canvas.width,
        ((ev.clientY - r.top) / r.height) * this.canvas.height,
      ];
    };
    return new Promise((resolve) => {
      const down = (ev: PointerEvent) => {
        const [x, y] = toLocal(ev);
        capture.pointerDown(x, y);
      };
      const move = (ev: PointerEvent) => {
        const [x, y] = toLocal(ev);
        capture.pointerMove(x, y);
        const pts = capture.result();
        if (pts && pts.length >= 2) {
          this.ctx.strokeStyle = "red";
          this.ctx.lineWidth = 2;
          const [x0, y0] = pts[pts.length - 2];
          this.ctx.beginPath();
          this.ctx.moveTo(x0, y0);
          this.ctx.lineTo(x, y);
          this.ctx.stroke();
        }
      };
      const up = () => capture.pointerUp();
      const key = (ev: KeyboardEvent) => {
        if (ev.key === "Enter") {
          this.canvas.removeEventListener("pointerdown", down);
          this.canvas.removeEventListener("pointermove", move);
          this.canvas.removeEventListener("pointerup", up);
          window.removeEventListener("keydown", key);
          resolve(capture.result());
        }
      };
      this.canvas.addEventListener("pointerdown", down);
      this.canvas.addEventListener("pointermove", move);
      this.canvas.addEventListener("pointerup", up);
      window.addEventListener("keydown", key);
    });
  }
}

export class KeyboardInput implements InputAdapter {
  private annotations: string[] = [];

  constructor() {
    window.addEventListener("blur", () => this.annotations.push("focus_lost"));
    document.addEventListener("visibilitychange", () => {
      if (document.visibilityState === "hidden") {
        this.annotations.push("tab_hidden");
      }
    });
  }

  awaitKey(keys: string[]): Promise<{ key: string; timeMs: number }> {
    return new Promise((resolve) => {
      const onKey = (ev: KeyboardEvent) => {
        const k = ev.key.toLowerCase();
        if (keys.includes(k)) {
          window.removeEventListener("keydown", onKey);
          resolve({ key: k, timeMs: performance.now() });
        }
      };
      window.addEventListener("keydown", onKey);
    });
  }

  takeAnnotations(): string[] {
    const out = this.annotations;
    this.annotations = [];
    return out;
  }
}

export function downloadSession(doc: SessionDoc, filename: string): void {
  const blob = new Blob([JSON.stringify(doc, null, 1)], {
    type: "application/json",
  });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}

export async function postSession(doc: SessionDoc, url: string): Promise<void> {
  const res = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(doc),
  });
  if (!res.ok) {
    throw new Error(`session upload failed: HTTP ${res.status}`);
  }
}
