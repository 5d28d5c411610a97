"""Live telemetry service: per-session acquisition, encoding, and scoring.

The pipeline logic lives in :class:`LiveSession`, a plain synchronous
object advanced one 120 Hz frame at a time; the FastAPI app wires it to a
WebSocket with JSON text messages. In lockstep mode the client drives
every frame (deterministic, used by tests); otherwise a background task
ticks the session at wall-clock rate.
"""

import asyncio
import hashlib
import json
import time
from collections import deque
from importlib import metadata

import numpy as np

from .acquisition import AcquisitionSession, DEFAULT_DELTA
from .codec import EventStream, write_aer
from .network import (
    GRID,
    LIFParams,
    N_CLASSES,
    SpikingStepper,
    T_STEPS,
    conv_snn_forward,
    conv_snn_spec,
    init_weights,
)
from .sensor import GRID_ROWS, GRID_COLS
from .trajectories import FOOTPRINT_SIGMA, FRAME_RATE

PROTOCOL_VERSION = 1
QUEUE_LIMIT = 256  # outbound messages per session before coalescing


def _package_version():
    try:
        return metadata.version("eskin")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def load_scoring_weights(checkpoint=None):
    """Conv net weights and checkpoint hash for live scoring.

    Without a checkpoint, seed-0 random weights keep the pipeline running
    (scores are meaningless but the protocol is complete).
    """
    spec = conv_snn_spec()
    if checkpoint is None:
        return spec, init_weights(spec, seed=0), None, "uninitialized"
    from .quantize import load_checkpoint

    kind, weights, quantized, _ = load_checkpoint(checkpoint)
    if kind != "conv_snn":
        raise ValueError(f"live scoring needs a conv_snn checkpoint, got {kind}")
    digest = hashlib.sha256(open(checkpoint, "rb").read()).hexdigest()[:16]
    if quantized is not None:
        return spec, quantized.codes, quantized.scales, digest
    return spec, weights, None, digest


class LiveSession:
    """One client's acquisition, encoding, and scoring pipeline.

    Frames advance only through :meth:`tick`. Touch input applies to the
    next frame's pressure field and does not persist: an untouched frame
    is an all-zero field.
    """

    def __init__(self, spec, weights, scales=None, delta: int = DEFAULT_DELTA,
                 params: LIFParams = LIFParams()):
        self.spec = spec
        self.weights = weights
        self.scales = scales
        self.params = params
        self.delta = delta
        self._footprint_inv2s2 = 1.0 / (2.0 * FOOTPRINT_SIGMA ** 2)
        rr, cc = np.meshgrid(np.arange(GRID_ROWS), np.arange(GRID_COLS), indexing="ij")
        self._rr, self._cc = rr, cc
        self.reset()

    def reset(self):
        self.acq = AcquisitionSession(delta=self.delta)
        self.stepper = SpikingStepper(self.spec, self.weights, self.params,
                                      zero_skipping=True, scales=self.scales)
        self.pending_field = np.zeros((GRID_ROWS, GRID_COLS))
        self.out_history = deque(maxlen=T_STEPS)  # per-frame output spikes
        self.window = deque(maxlen=T_STEPS)       # per-frame input spike grids
        self.window_counts = np.zeros(N_CLASSES)
        self.frame = 0
        self.events_total = 0

    def ingest_touch(self, x: float, y: float, pressure: float):
        """Deposit one touch footprint into the next frame's field."""
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"touch coordinates out of range: ({x}, {y})")
        if pressure < 0:
            raise ValueError("pressure must be non-negative")
        if pressure == 0:
            return
        col = x * (GRID_COLS - 1)
        row = y * (GRID_ROWS - 1)
        d2 = (self._rr - row) ** 2 + (self._cc - col) ** 2
        blob = pressure * np.exp(-d2 * self._footprint_inv2s2)
        blob[blob < 1e-3] = 0.0
        np.maximum(self.pending_field, blob, out=self.pending_field)

    def tick(self):
        """Advance one frame; returns the telemetry dict batch."""
        t = self.frame
        res = self.acq.step(self.pending_field)
        self.pending_field = np.zeros((GRID_ROWS, GRID_COLS))

        spikes = np.zeros((GRID, GRID), np.int64)
        if res.addresses.size:
            flat = spikes.reshape(-1)
            flat[res.addresses] = res.polarities
        self.window.append(spikes)
        out = self.stepper.step(spikes)
        if len(self.out_history) == self.out_history.maxlen:
            self.window_counts -= self.out_history[0]
        self.out_history.append(out.astype(np.float64))
        self.window_counts += self.out_history[-1]

        self.frame += 1
        self.events_total += int(res.addresses.size)
        scores = self.window_counts
        batch = [
            {"type": "events", "frame": t,
             "events": [[int(a), int(p), t] for a, p in
                        zip(res.addresses, res.polarities)]},
            {"type": "scan_stats", "frame": t, "count": int(self.acq.total_scans),
             "frame_scans": int(res.scans), "mode": res.mode,
             "events_total": self.events_total,
             "effective_macs": float(self.stepper.stats.total_effective_macs)},
            {"type": "scores", "frame": t, "scores": [float(s) for s in scores],
             "argmax": int(np.argmax(scores))},
        ]
        if res.hotspot is not None:
            batch.insert(1, {"type": "hotspot", "frame": t,
                             "r": int(res.hotspot[0]), "c": int(res.hotspot[1])})
        return batch

    def window_spikes(self):
        """Current sliding window as a (T, 16, 16) tensor, zero-padded at the old end."""
        tensor = np.zeros((T_STEPS, GRID, GRID), np.int64)
        got = len(self.window)
        for i, frame in enumerate(self.window):
            tensor[T_STEPS - got + i] = frame
        return tensor

    def classify_window(self):
        """Window-exact scores: batch forward over the zero-padded window."""
        scores, _ = conv_snn_forward(self.window_spikes(), self.weights,
                                     self.spec, self.params, scales=self.scales)
        return scores

    def event_stream(self):
        """Events of the frames still in the window, as an EventStream."""
        tensor = self.window_spikes()
        ts, idx = np.nonzero(tensor.reshape(T_STEPS, -1))
        return EventStream(
            rows=GRID_ROWS, cols=GRID_COLS, frame_count=T_STEPS, delta=self.delta,
            addresses=idx, timestamps=ts,
            polarities=tensor.reshape(T_STEPS, -1)[ts, idx],
        )


def _error(code, msg, frame=None):
    out = {"type": "error", "code": code, "msg": msg}
    if frame is not None:
        out["frame"] = frame
    return out


def handle_message(session: LiveSession, msg: dict, lockstep: bool):
    """Apply one client message; returns (reply batch, binary_mode or None).

    The transport layer owns timing in realtime mode; in lockstep mode the
    "tick" message advances exactly one frame.
    """
    mtype = msg.get("type")
    if mtype == "hello":
        grid = msg.get("grid", GRID)
        if grid != GRID:
            return [_error("grid", f"only {GRID}x{GRID} arrays are served")], None
        binary = bool(msg.get("binary", False))
        return [{"type": "hello", "version": PROTOCOL_VERSION, "grid": GRID,
                 "lockstep": lockstep, "binary": binary}], binary
    if mtype == "touch":
        try:
            session.ingest_touch(float(msg["x"]), float(msg["y"]),
                                 float(msg.get("pressure", 0.0)))
        except (KeyError, TypeError):
            return [_error("schema", "touch needs numeric x, y, pressure")], None
        except ValueError as exc:
            return [_error("range", str(exc), session.frame)], None
        return [], None
    if mtype == "clear":
        session.reset()
        return [{"type": "scan_stats", "frame": 0, "count": 0, "frame_scans": 0,
                 "mode": "searching", "events_total": 0, "effective_macs": 0.0}], None
    if mtype == "tick":
        if not lockstep:
            return [_error("mode", "tick is only valid in lockstep mode")], None
        return session.tick(), None
    if mtype == "classify":
        scores = session.classify_window()
        return [{"type": "scores", "frame": session.frame - 1,
                 "scores": [float(s) for s in scores],
                 "argmax": int(np.argmax(scores)), "window_exact": True}], None
    return [_error("type", f"unknown message type {mtype!r}")], None


def coalesce(queue: list) -> list:
    """Collapse a backlog: merge event batches, keep only the latest of the
    per-frame status messages. Counters stay exact because scan_stats carries
    running totals."""
    events = []
    latest = {}
    for msg in queue:
        if msg["type"] == "events":
            events.extend(msg["events"])
            latest["events"] = msg
        else:
            latest[msg["type"]] = msg
    out = []
    if "events" in latest:
        merged = dict(latest["events"])
        merged["events"] = events
        merged["coalesced"] = True
        out.append(merged)
    for key in ("hotspot", "scan_stats", "scores", "error", "hello"):
        if key in latest:
            out.append(latest[key])
    return out


def create_app(checkpoint=None, lockstep: bool = False,
               frame_rate: float = FRAME_RATE):
    """FastAPI application serving /stream and /healthz."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    spec, weights, scales, digest = load_scoring_weights(checkpoint)
    app = FastAPI(title="eskin live service")

    @app.get("/healthz")
    def healthz():
        return {"version": _package_version(), "checkpoint_hash": digest,
                "protocol": PROTOCOL_VERSION, "lockstep": lockstep}

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        session = LiveSession(spec, weights, scales)
        binary_mode = False
        outbox: list = []

        async def flush():
            nonlocal outbox
            if len(outbox) > QUEUE_LIMIT:
                outbox = coalesce(outbox)
            for msg in outbox:
                if binary_mode and msg["type"] == "events":
                    stream = EventStream(
                        rows=GRID_ROWS, cols=GRID_COLS,
                        frame_count=session.frame or 1, delta=session.delta,
                        addresses=np.array([e[0] for e in msg["events"]], np.int64),
                        timestamps=np.array([e[2] for e in msg["events"]], np.int64),
                        polarities=np.array([e[1] for e in msg["events"]], np.int64),
                    )
                    await ws.send_bytes(write_aer(stream))
                else:
                    await ws.send_text(json.dumps(msg))
            outbox = []

        async def ticker():
            period = 1.0 / frame_rate
            next_t = time.monotonic()
            while True:
                outbox.extend(session.tick())
                await flush()
                next_t += period
                await asyncio.sleep(max(0.0, next_t - time.monotonic()))

        tick_task = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    outbox.append(_error("schema", "messages must be JSON objects"))
                    await flush()
                    continue
                replies, negotiated = handle_message(session, msg, lockstep)
                if negotiated is not None:
                    binary_mode = negotiated
                    if not lockstep and tick_task is None:
                        tick_task = asyncio.create_task(ticker())
                outbox.extend(replies)
                await flush()
        except WebSocketDisconnect:
            pass
        finally:
            if tick_task is not None:
                tick_task.cancel()

    return app
