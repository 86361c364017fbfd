/**
 * Scalpel stroke capture.  Pointer rays are resolved to surface hits; hits
 * become ScalpelSample messages once the pointer has travelled the client
 * distance threshold.  The threshold only rate-limits traffic — the
 * server runs its own authoritative resampling on top.
 */
import type { ScalpelSampleMsg } from "./protocol.js";

type Vec3 = [number, number, number];

export interface StrokeOptions {
  /** Minimum tip travel between emitted samples. */
  distanceThreshold: number;
  /** How far behind the tip the scalpel handle end sits. */
  bladeLength: number;
}

function dist(a: Vec3, b: Vec3): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

export class StrokeState {
  active = false;
  /** Every surface hit seen this stroke, time-ordered. */
  readonly hits: { tMs: number; tip: Vec3 }[] = [];
  private emitted: Vec3 | null = null;
  private pending: ScalpelSampleMsg | null = null;
  private endStrokeSent = false;

  constructor(private options: StrokeOptions) {}

  begin(tMs: number, tip: Vec3, rayDirection: Vec3): ScalpelSampleMsg[] {
    this.active = true;
    this.endStrokeSent = false;
    this.hits.length = 0;
    this.emitted = null;
    // Hold the first sample back until the pointer actually travels: a
    // click without a drag must not send any tear samples.
    this.pending = this.sample(tMs, tip, rayDirection);
    this.hits.push({ tMs, tip });
    return [];
  }

  move(tMs: number, tip: Vec3, rayDirection: Vec3): ScalpelSampleMsg[] {
    if (!this.active) return [];
    this.hits.push({ tMs, tip });
    const reference = this.emitted ?? (this.pending!.tip as Vec3);
    // Relative epsilon so accumulated rounding in pointer positions cannot
    // swallow a sample that travelled exactly one threshold.
    if (dist(tip, reference) < this.options.distanceThreshold * (1 - 1e-9)) return [];

    const out: ScalpelSampleMsg[] = [];
    if (this.pending !== null) {
      out.push(this.pending);
      this.pending = null;
    }
    out.push(this.sample(tMs, tip, rayDirection));
    this.emitted = tip;
    return out;
  }

  /** Pointer release: exactly one EndStroke, and only for a real drag. */
  end(): { type: "EndStroke" }[] {
    if (!this.active || this.endStrokeSent) return [];
    this.active = false;
    this.endStrokeSent = true;
    this.pending = null;
    if (this.emitted === null) return [];
    return [{ type: "EndStroke" }];
  }

  private sample(tMs: number, tip: Vec3, rayDirection: Vec3): ScalpelSampleMsg {
    const len = Math.hypot(...rayDirection) || 1;
    const end: Vec3 = [
      tip[0] - (rayDirection[0] / len) * this.options.bladeLength,
      tip[1] - (rayDirection[1] / len) * this.options.bladeLength,
      tip[2] - (rayDirection[2] / len) * this.options.bladeLength,
    ];
    return { type: "ScalpelSample", t_ms: tMs, tip, end };
  }
}
