/** Wire protocol for the live telemetry service (JSON text frames). */

export const PROTOCOL_VERSION = 1;
export const GRID = 16;
export const WINDOW_FRAMES = 240;
export const FRAME_RATE = 120;
export const N_CLASSES = 9;

// client -> server
export interface HelloMsg {
  type: "hello";
  grid: number;
  binary?: boolean;
}
export interface TouchMsg {
  type: "touch";
  x: number; // unit square, 0..1
  y: number;
  pressure: number; // kPa
}
export interface TickMsg {
  type: "tick";
}
export interface ClearMsg {
  type: "clear";
}
export interface ClassifyMsg {
  type: "classify";
}
export type ClientMsg = HelloMsg | TouchMsg | TickMsg | ClearMsg | ClassifyMsg;

// server -> client
export interface HelloReply {
  type: "hello";
  version: number;
  grid: number;
  lockstep: boolean;
  binary: boolean;
}
/** One event is [address, polarity, frame]. */
export type WireEvent = [number, number, number];
export interface EventsMsg {
  type: "events";
  frame: number;
  events: WireEvent[];
  coalesced?: boolean;
}
export interface HotspotMsg {
  type: "hotspot";
  frame: number;
  r: number;
  c: number;
}
export interface ScanStatsMsg {
  type: "scan_stats";
  frame: number;
  count: number;
  frame_scans: number;
  mode: string;
  events_total: number;
  effective_macs: number;
}
export interface ScoresMsg {
  type: "scores";
  frame: number;
  scores: number[];
  argmax: number;
  window_exact?: boolean;
}
export interface ErrorMsg {
  type: "error";
  code: string;
  msg: string;
  frame?: number;
}
export type ServerMsg =
  | HelloReply
  | EventsMsg
  | HotspotMsg
  | ScanStatsMsg
  | ScoresMsg
  | ErrorMsg;

/** Parse one socket text frame; returns null for non-JSON payloads. */
export function parseServerMsg(text: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as { type?: unknown };
  if (typeof m.type !== "string") return null;
  return obj as ServerMsg;
}
