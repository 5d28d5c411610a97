/** End-to-end test against a real service with a trained checkpoint.
 *
 * Spawns `eskin serve --lockstep`, drives a scripted pointer trace of the
 * digit "1" through the same pointer->touch mapping the UI uses, and
 * asserts the classifier's argmax lands on digit 1 within 0.5 s (60
 * lockstep frames) of stroke end. Also checks that replaying the recorded
 * message log reproduces the identical final view state.
 *
 * The checkpoint is trained once via the CLI and cached under .cache/.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { existsSync, mkdirSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { toTouch } from "../../src/pointer";
import { parseServerMsg, ServerMsg, ScoresMsg } from "../../src/protocol";
import { initialState, reduce, replay, UiState } from "../../src/state";

const PORT = 8741;
const HERE = fileURLToPath(new URL(".", import.meta.url));
const CACHE = join(HERE, "..", "..", ".cache");
const CHECKPOINT = join(CACHE, "conv_snn.npz");
const MANIFEST = join(CACHE, "data", "manifest.json");

let server: ChildProcess;

function run(args: string[]): void {
  const res = spawnSync("eskin", args, { stdio: "inherit", timeout: 570_000 });
  if (res.status !== 0) throw new Error(`eskin ${args[0]} failed`);
}

async function waitForHealth(): Promise<void> {
  for (let i = 0; i < 200; i++) {
    try {
      const res = await fetch(`http://127.0.0.1:${PORT}/healthz`);
      if (res.ok) {
        const body = await res.json();
        expect(body.lockstep).toBe(true);
        expect(body.checkpoint_hash).not.toBe("uninitialized");
        return;
      }
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  mkdirSync(CACHE, { recursive: true });
  if (!existsSync(CHECKPOINT)) {
    run(["gen", "--per-class", "20", "--styles", "8", "--out",
         join(CACHE, "data")]);
    run(["train", "--manifest", MANIFEST, "--network", "conv_snn",
         "--out", CHECKPOINT]);
  }
  server = spawn(
    "eskin",
    ["serve", "--lockstep", "--port", String(PORT),
     "--checkpoint", CHECKPOINT],
    { stdio: "ignore" },
  );
  await waitForHealth();
});

afterAll(() => {
  server?.kill();
});

class Client {
  ws!: WebSocket;
  log: ServerMsg[] = [];
  state: UiState = initialState();

  async connect(): Promise<void> {
    this.ws = new WebSocket(`ws://127.0.0.1:${PORT}/stream`);
    this.ws.on("message", (data) => {
      const msg = parseServerMsg(data.toString());
      if (msg) {
        this.log.push(msg);
        this.state = reduce(this.state, msg);
      }
    });
    await new Promise<void>((resolve, reject) => {
      this.ws.once("open", () => resolve());
      this.ws.once("error", reject);
    });
    this.ws.send(JSON.stringify({ type: "hello", grid: 16 }));
    await this.waitFor((m) => m.type === "hello");
  }

  send(obj: unknown): void {
    this.ws.send(JSON.stringify(obj));
  }

  /** Lockstep tick: advance one frame and wait for its scores message. */
  async tick(): Promise<ScoresMsg> {
    const seen = this.log.length;
    this.send({ type: "tick" });
    await this.waitFor(
      (m, i) => i >= seen && m.type === "scores", 5000);
    return this.log.filter((m): m is ScoresMsg => m.type === "scores").at(-1)!;
  }

  async waitFor(
    pred: (m: ServerMsg, index: number) => boolean,
    timeoutMs = 10_000,
  ): Promise<void> {
    const t0 = Date.now();
    for (;;) {
      if (this.log.some(pred)) return;
      if (Date.now() - t0 > timeoutMs) throw new Error("timed out waiting");
      await new Promise((r) => setTimeout(r, 5));
    }
  }

  close(): void {
    this.ws.close();
  }
}

/** Scripted pointer trace of the digit "1": a vertical downstroke through
 * canvas center, 100 frames long, mapped exactly like live pointer input. */
function digitOneTrace(canvas = 480): { x: number; y: number; pressure: number }[] {
  const out = [];
  for (let i = 0; i < 100; i++) {
    const sample = {
      offsetX: canvas * 0.52,
      offsetY: canvas * (0.15 + (0.7 * i) / 99),
      pressure: 0.75, // stylus-style device pressure
      buttons: 1,
    };
    const msg = toTouch(sample, canvas, canvas)!;
    out.push({ x: msg.x, y: msg.y, pressure: msg.pressure });
  }
  return out;
}

describe("live service e2e", () => {
  it("digit-1 stroke classifies as 1 within 0.5 s of stroke end", async () => {
    const client = new Client();
    await client.connect();
    for (const pt of digitOneTrace()) {
      client.send({ type: "touch", ...pt });
      await client.tick();
    }
    const strokeEnd = Date.now();
    // 0.5 s at the 120 Hz session clock = 60 lockstep frames
    let hit = false;
    for (let i = 0; i < 60 && !hit; i++) {
      const scores = await client.tick();
      hit = scores.argmax === 0; // class 0 renders as digit "1"
    }
    const elapsed = Date.now() - strokeEnd;
    expect(hit).toBe(true);
    expect(client.state.argmax).toBe(0);
    expect(elapsed).toBeLessThan(500 * 100); // sanity against pathological stalls
    // replay determinism: the recorded log reproduces the final view state
    expect(replay(client.log)).toEqual(client.state);
    expect(replay(client.log)).toEqual(replay(client.log));
    client.close();
  });

  it("identical scripts produce identical logs and states", async () => {
    const a = new Client();
    const b = new Client();
    await a.connect();
    await b.connect();
    for (const client of [a, b]) {
      for (const pt of digitOneTrace().slice(0, 40)) {
        client.send({ type: "touch", ...pt });
        await client.tick();
      }
    }
    expect(JSON.stringify(a.log)).toBe(JSON.stringify(b.log));
    expect(a.state).toEqual(b.state);
    a.close();
    b.close();
  });
});
