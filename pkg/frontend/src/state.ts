/** Pure view state over the wire protocol.
 *
 * The reducer is the single source of truth for the UI: replaying a
 * recorded message log through `reduce` reproduces the identical final
 * state, so rendering is a pure function of `UiState` plus local pointer
 * overlay. No classification logic lives client-side.
 */

import {
  GRID,
  N_CLASSES,
  ServerMsg,
  WINDOW_FRAMES,
  WireEvent,
} from "./protocol";

export type ConnectionStatus = "disconnected" | "connecting" | "ready";

export interface UiState {
  status: ConnectionStatus;
  lockstep: boolean;
  frame: number;
  /** 16x16 decayed event-pressure heat overlay, row-major, values >= 0. */
  heat: number[];
  /** Rolling event raster: last WINDOW_FRAMES frames of per-frame events. */
  raster: { frame: number; events: WireEvent[] }[];
  hotspot: { r: number; c: number } | null;
  scores: number[];
  argmax: number;
  scanCount: number;
  scanMode: string;
  eventsTotal: number;
  effectiveMacs: number;
  /** Visible warnings (unknown message types, server errors). */
  warnings: string[];
  lastError: string | null;
}

export const HEAT_DECAY = 0.92;
const MAX_WARNINGS = 20;

export function initialState(): UiState {
  return {
    status: "disconnected",
    lockstep: false,
    frame: 0,
    heat: new Array(GRID * GRID).fill(0),
    raster: [],
    hotspot: null,
    scores: new Array(N_CLASSES).fill(0),
    argmax: 0,
    scanCount: 0,
    scanMode: "searching",
    eventsTotal: 0,
    effectiveMacs: 0,
    warnings: [],
    lastError: null,
  };
}

function pushWarning(state: UiState, text: string): UiState {
  const warnings = [...state.warnings, text].slice(-MAX_WARNINGS);
  return { ...state, warnings };
}

function applyEvents(state: UiState, frame: number, events: WireEvent[]): UiState {
  const heat = state.heat.map((v) => v * HEAT_DECAY);
  for (const [addr, pol] of events) {
    if (addr >= 0 && addr < GRID * GRID) heat[addr] += pol > 0 ? 1 : 0.4;
  }
  const raster = [...state.raster, { frame, events }].slice(-WINDOW_FRAMES);
  return { ...state, frame, heat, raster };
}

/** Apply one server message; returns a new state (input state untouched). */
export function reduce(state: UiState, msg: ServerMsg): UiState {
  switch (msg.type) {
    case "hello":
      return { ...state, status: "ready", lockstep: msg.lockstep };
    case "events":
      return applyEvents(state, msg.frame, msg.events);
    case "hotspot":
      return { ...state, hotspot: { r: msg.r, c: msg.c } };
    case "scan_stats":
      return {
        ...state,
        scanCount: msg.count,
        scanMode: msg.mode,
        eventsTotal: msg.events_total,
        effectiveMacs: msg.effective_macs,
        // a count-0 stats frame is the server's "cleared" acknowledgement
        ...(msg.count === 0 && msg.frame === 0
          ? {
              frame: 0,
              heat: new Array(GRID * GRID).fill(0),
              raster: [],
              hotspot: null,
              scores: new Array(N_CLASSES).fill(0),
              argmax: 0,
            }
          : {}),
      };
    case "scores":
      return { ...state, scores: msg.scores, argmax: msg.argmax };
    case "error":
      return pushWarning(
        { ...state, lastError: `${msg.code}: ${msg.msg}` },
        `server error ${msg.code}: ${msg.msg}`,
      );
    default:
      // never drop silently: surface a visible warning
      return pushWarning(
        state,
        `unknown message type ${JSON.stringify((msg as { type: unknown }).type)}`,
      );
  }
}

/** Replay a recorded log from scratch (determinism oracle for tests). */
export function replay(log: ServerMsg[]): UiState {
  return log.reduce(reduce, initialState());
}
