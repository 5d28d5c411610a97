/** Bounded inbound message queue with coalescing.
 *
 * Socket handling and rendering are decoupled: messages accumulate here
 * and the render loop drains once per animation frame. When a burst
 * exceeds the bound, event batches are merged (all events kept) and only
 * the latest of each per-frame status message survives — mirroring the
 * server's own back-pressure rule, so counters remain exact.
 */

import { EventsMsg, ServerMsg, WireEvent } from "./protocol";

export const QUEUE_LIMIT = 256;

const STATUS_ORDER = ["hotspot", "scan_stats", "scores", "error", "hello"] as const;

export function coalesce(queue: ServerMsg[]): ServerMsg[] {
  const events: WireEvent[] = [];
  const latest = new Map<string, ServerMsg>();
  for (const msg of queue) {
    if (msg.type === "events") {
      events.push(...msg.events);
      latest.set("events", msg);
    } else {
      latest.set(msg.type, msg);
    }
  }
  const out: ServerMsg[] = [];
  const lastEvents = latest.get("events") as EventsMsg | undefined;
  if (lastEvents) out.push({ ...lastEvents, events, coalesced: true });
  for (const key of STATUS_ORDER) {
    const msg = latest.get(key);
    if (msg) out.push(msg);
  }
  // anything with an unrecognized type still flows through (the reducer
  // warns about it); keep only the latest of each
  for (const [key, msg] of latest) {
    if (key !== "events" && !(STATUS_ORDER as readonly string[]).includes(key)) {
      out.push(msg);
    }
  }
  return out;
}

export class MessageQueue {
  private items: ServerMsg[] = [];

  push(msg: ServerMsg): void {
    this.items.push(msg);
    if (this.items.length > QUEUE_LIMIT) {
      this.items = coalesce(this.items);
    }
  }

  /** Remove and return everything queued, in order. */
  drain(): ServerMsg[] {
    const out = this.items;
    this.items = [];
    return out;
  }

  get length(): number {
    return this.items.length;
  }
}
