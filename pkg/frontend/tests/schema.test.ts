/** The checked-in wire schema and the TS types must agree: every message
 * shape the reducer understands validates against the schema document. A
 * minimal draft-07 subset validator keeps this dependency-free. */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ServerMsg } from "../src/protocol";

type Schema = {
  const?: unknown;
  type?: string;
  required?: string[];
  properties?: Record<string, Schema>;
  items?: Schema;
  minItems?: number;
  maxItems?: number;
  oneOf?: Schema[];
  $ref?: string;
  definitions?: Record<string, Schema>;
};

const root: Schema = JSON.parse(
  readFileSync(join(__dirname, "..", "schema", "wire.schema.json"), "utf8"),
);

function resolve(s: Schema): Schema {
  if (s.$ref) {
    const name = s.$ref.replace("#/definitions/", "");
    return root.definitions![name];
  }
  return s;
}

function valid(value: unknown, schema: Schema): boolean {
  const s = resolve(schema);
  if (s.oneOf) return s.oneOf.filter((sub) => valid(value, sub)).length === 1;
  if (s.const !== undefined) return value === s.const;
  switch (s.type) {
    case "integer":
      return typeof value === "number" && Number.isInteger(value);
    case "number":
      return typeof value === "number";
    case "string":
      return typeof value === "string";
    case "boolean":
      return typeof value === "boolean";
    case "array": {
      if (!Array.isArray(value)) return false;
      if (s.minItems !== undefined && value.length < s.minItems) return false;
      if (s.maxItems !== undefined && value.length > s.maxItems) return false;
      return s.items ? value.every((v) => valid(v, s.items!)) : true;
    }
    case "object": {
      if (typeof value !== "object" || value === null || Array.isArray(value))
        return false;
      const obj = value as Record<string, unknown>;
      for (const key of s.required ?? []) {
        if (!(key in obj)) return false;
      }
      for (const [key, sub] of Object.entries(s.properties ?? {})) {
        if (key in obj && !valid(obj[key], sub)) return false;
      }
      return true;
    }
    default:
      return true;
  }
}

const samples: ServerMsg[] = [
  { type: "hello", version: 1, grid: 16, lockstep: true, binary: false },
  { type: "events", frame: 3, events: [[12, 1, 3], [200, -1, 3]] },
  { type: "events", frame: 9, events: [], coalesced: true },
  { type: "hotspot", frame: 4, r: 7, c: 9 },
  {
    type: "scan_stats", frame: 4, count: 25, frame_scans: 9,
    mode: "tracking", events_total: 80, effective_macs: 12345.5,
  },
  {
    type: "scores", frame: 4, scores: [0, 1, 2, 3, 4, 5, 6, 7, 8], argmax: 8,
  },
  { type: "error", code: "range", msg: "out of range", frame: 2 },
];

describe("wire schema", () => {
  it.each(samples.map((m) => [m.type, m] as const))(
    "accepts a %s message", (_name, msg) => {
      expect(valid(msg, root)).toBe(true);
    });

  it("rejects malformed messages", () => {
    expect(valid({ type: "events", frame: 0 }, root)).toBe(false);
    expect(valid({ type: "hotspot", frame: 0, r: 1 }, root)).toBe(false);
    expect(valid({ type: "scores", frame: 0, scores: [1], argmax: 0 }, root))
      .toBe(false);
    expect(valid({ type: "warp" }, root)).toBe(false);
    expect(valid({ type: "events", frame: 0, events: [[1, 1]] }, root))
      .toBe(false);
  });
});
