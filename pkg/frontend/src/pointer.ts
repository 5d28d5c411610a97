/** Pointer capture: canvas pointer events -> touch wire messages.
 *
 * Positions map to the unit square; pressure comes from the device when
 * it reports one, else a stylus-radius heuristic, else a constant.
 * Output is throttled to the 120 Hz session clock.
 */

import { FRAME_RATE, TouchMsg } from "./protocol";

export const DEFAULT_PRESSURE_KPA = 300;
export const MAX_PRESSURE_KPA = 500;
export const FRAME_MS = 1000 / FRAME_RATE;

/** Subset of PointerEvent the mapper needs (test-friendly). */
export interface PointerSample {
  offsetX: number;
  offsetY: number;
  /** Device pressure in [0, 1]; 0 or undefined means "not reported". */
  pressure?: number;
  /** Contact width in px (stylus/finger radius heuristic). */
  width?: number;
  buttons: number;
}

export function toTouch(
  sample: PointerSample,
  canvasWidth: number,
  canvasHeight: number,
): TouchMsg | null {
  if (canvasWidth <= 0 || canvasHeight <= 0) return null;
  const x = Math.min(1, Math.max(0, sample.offsetX / canvasWidth));
  const y = Math.min(1, Math.max(0, sample.offsetY / canvasHeight));
  if (sample.buttons === 0) {
    return { type: "touch", x, y, pressure: 0 }; // pointer-up / hover
  }
  let pressure: number;
  if (sample.pressure && sample.pressure > 0 && sample.pressure !== 0.5) {
    // real device pressure (0.5 is the spec'd mouse constant)
    pressure = sample.pressure * MAX_PRESSURE_KPA;
  } else if (sample.width && sample.width > 1) {
    pressure = Math.min(MAX_PRESSURE_KPA, 50 * sample.width);
  } else {
    pressure = DEFAULT_PRESSURE_KPA;
  }
  return { type: "touch", x, y, pressure };
}

/** Keeps at most one touch per 120 Hz frame slot. */
export class FrameThrottle {
  private lastSlot = -1;

  constructor(private readonly now: () => number = () => performance.now()) {}

  /** Returns true when the message may be sent in the current frame slot. */
  admit(): boolean {
    const slot = Math.floor(this.now() / FRAME_MS);
    if (slot === this.lastSlot) return false;
    this.lastSlot = slot;
    return true;
  }
}
