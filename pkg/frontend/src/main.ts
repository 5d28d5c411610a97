/** App wiring: socket -> bounded queue -> reducer -> canvas, and
 * pointer -> throttled touch messages. All view logic lives in state.ts;
 * this file only moves data. */

import { FrameThrottle, PointerSample, toTouch } from "./pointer";
import { GRID, parseServerMsg } from "./protocol";
import { MessageQueue } from "./queue";
import { drawHeatmap, drawRaster, drawScores, statusLine } from "./render";
import { initialState, reduce, UiState } from "./state";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const host = location.hostname || "127.0.0.1";
  const port = new URLSearchParams(location.search).get("port") ?? "8030";
  return `${proto}://${host}:${port}/stream`;
}

function start(): void {
  const pad = el<HTMLCanvasElement>("pad");
  const raster = el<HTMLCanvasElement>("raster");
  const bars = el<HTMLCanvasElement>("bars");
  const status = el<HTMLDivElement>("status");
  const warnings = el<HTMLDivElement>("warnings");
  const padCtx = pad.getContext("2d")!;
  const rasterCtx = raster.getContext("2d")!;
  const barsCtx = bars.getContext("2d")!;

  let state: UiState = { ...initialState(), status: "connecting" };
  const queue = new MessageQueue();
  const throttle = new FrameThrottle();

  const ws = new WebSocket(wsUrl());
  ws.onopen = () =>
    ws.send(JSON.stringify({ type: "hello", grid: GRID }));
  ws.onmessage = (ev) => {
    if (typeof ev.data !== "string") return;
    const msg = parseServerMsg(ev.data);
    if (msg) queue.push(msg);
  };
  ws.onclose = () => {
    state = { ...state, status: "disconnected" };
  };

  const sendTouch = (sample: PointerSample) => {
    const msg = toTouch(sample, pad.clientWidth, pad.clientHeight);
    if (msg && (msg.pressure === 0 || throttle.admit()) &&
        ws.readyState === WebSocket.OPEN) {
      ws.send(JSON.stringify(msg));
    }
  };
  pad.addEventListener("pointerdown", (e) => {
    pad.setPointerCapture(e.pointerId);
    sendTouch(e);
  });
  pad.addEventListener("pointermove", (e) => {
    if (e.buttons) sendTouch(e);
  });
  pad.addEventListener("pointerup", (e) => sendTouch(e));
  el<HTMLButtonElement>("clear").onclick = () => {
    if (ws.readyState === WebSocket.OPEN) ws.send(JSON.stringify({ type: "clear" }));
  };

  const frame = () => {
    for (const msg of queue.drain()) state = reduce(state, msg);
    drawHeatmap(padCtx, state, pad.width);
    drawRaster(rasterCtx, state, raster.width, raster.height);
    drawScores(barsCtx, state, bars.width, bars.height);
    status.textContent = statusLine(state);
    warnings.textContent = state.warnings.slice(-3).join(" | ");
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

start();
