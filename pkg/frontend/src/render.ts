/** Canvas rendering: a pure function of UiState (plus pointer overlay).
 *
 * Heatmap and event raster are drawn on canvas, not DOM elements, so a
 * 10k-event burst costs one fill pass, not 10k node updates.
 */

import { GRID, N_CLASSES, WINDOW_FRAMES } from "./protocol";
import { UiState } from "./state";

function heatColor(v: number): string {
  const t = Math.min(1, v);
  const r = Math.round(30 + 225 * t);
  const g = Math.round(30 + 110 * t);
  const b = Math.round(60 + 40 * (1 - t));
  return `rgb(${r},${g},${b})`;
}

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  state: UiState,
  size: number,
): void {
  const cell = size / GRID;
  ctx.fillStyle = "#101018";
  ctx.fillRect(0, 0, size, size);
  for (let r = 0; r < GRID; r++) {
    for (let c = 0; c < GRID; c++) {
      const v = state.heat[r * GRID + c];
      if (v <= 0.01) continue;
      ctx.fillStyle = heatColor(v);
      ctx.fillRect(c * cell + 1, r * cell + 1, cell - 2, cell - 2);
    }
  }
  if (state.hotspot) {
    ctx.strokeStyle = "#4cf2a8";
    ctx.lineWidth = 2;
    ctx.strokeRect(
      (state.hotspot.c - 1) * cell,
      (state.hotspot.r - 1) * cell,
      cell * 3,
      cell * 3,
    );
  }
}

export function drawRaster(
  ctx: CanvasRenderingContext2D,
  state: UiState,
  width: number,
  height: number,
): void {
  ctx.fillStyle = "#101018";
  ctx.fillRect(0, 0, width, height);
  const colW = width / WINDOW_FRAMES;
  const rowH = height / (GRID * GRID);
  const first = state.raster.length
    ? state.raster[state.raster.length - 1].frame - WINDOW_FRAMES + 1
    : 0;
  for (const { frame, events } of state.raster) {
    const x = (frame - first) * colW;
    if (x < 0) continue;
    for (const [addr, pol] of events) {
      ctx.fillStyle = pol > 0 ? "#ff9857" : "#57a8ff";
      ctx.fillRect(x, addr * rowH, Math.max(1, colW), Math.max(1, rowH));
    }
  }
}

export function drawScores(
  ctx: CanvasRenderingContext2D,
  state: UiState,
  width: number,
  height: number,
): void {
  ctx.fillStyle = "#101018";
  ctx.fillRect(0, 0, width, height);
  const peak = Math.max(1, ...state.scores);
  const barW = width / N_CLASSES;
  for (let k = 0; k < N_CLASSES; k++) {
    const h = (state.scores[k] / peak) * (height - 18);
    ctx.fillStyle = k === state.argmax ? "#4cf2a8" : "#5a5a72";
    ctx.fillRect(k * barW + 3, height - 14 - h, barW - 6, h);
    ctx.fillStyle = "#c8c8d8";
    ctx.font = "12px monospace";
    ctx.textAlign = "center";
    ctx.fillText(String(k + 1), k * barW + barW / 2, height - 2);
  }
}

export function statusLine(state: UiState): string {
  return (
    `${state.status} | frame ${state.frame} | mode ${state.scanMode} | ` +
    `scans ${state.scanCount} | events ${state.eventsTotal} | ` +
    `MACs ${Math.round(state.effectiveMacs)}`
  );
}
