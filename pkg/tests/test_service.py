import json

import numpy as np
import pytest

from eskin.codec import read_aer
from eskin.network import conv_snn_forward, conv_snn_spec, init_weights
from eskin.service import (
    LiveSession,
    PROTOCOL_VERSION,
    QUEUE_LIMIT,
    coalesce,
    create_app,
    handle_message,
    load_scoring_weights,
)


@pytest.fixture(scope="module")
def session_parts():
    spec, weights, scales, digest = load_scoring_weights(None)
    return spec, weights, scales, digest


def fresh_session(session_parts):
    spec, weights, scales, _ = session_parts
    return LiveSession(spec, weights, scales)


def by_type(batch):
    out = {}
    for msg in batch:
        out.setdefault(msg["type"], msg)
    return out


class TestHandleMessage:
    def test_hello_negotiation(self, session_parts):
        s = fresh_session(session_parts)
        replies, binary = handle_message(s, {"type": "hello", "grid": 16}, True)
        assert replies[0]["type"] == "hello"
        assert replies[0]["version"] == PROTOCOL_VERSION
        assert replies[0]["lockstep"] is True
        assert binary is False

    def test_hello_wrong_grid(self, session_parts):
        s = fresh_session(session_parts)
        replies, _ = handle_message(s, {"type": "hello", "grid": 32}, True)
        assert replies[0]["type"] == "error" and replies[0]["code"] == "grid"

    def test_touch_out_of_range(self, session_parts):
        s = fresh_session(session_parts)
        replies, _ = handle_message(
            s, {"type": "touch", "x": 1.4, "y": 0.2, "pressure": 300}, True)
        assert replies[0]["code"] == "range"

    def test_touch_bad_schema(self, session_parts):
        s = fresh_session(session_parts)
        replies, _ = handle_message(s, {"type": "touch", "x": 0.5}, True)
        assert replies[0]["code"] == "schema"

    def test_unknown_type(self, session_parts):
        s = fresh_session(session_parts)
        replies, _ = handle_message(s, {"type": "warp"}, True)
        assert replies[0]["code"] == "type"

    def test_tick_rejected_in_realtime_mode(self, session_parts):
        s = fresh_session(session_parts)
        replies, _ = handle_message(s, {"type": "tick"}, False)
        assert replies[0]["code"] == "mode"

    def test_clear_resets(self, session_parts):
        s = fresh_session(session_parts)
        handle_message(s, {"type": "touch", "x": 0.5, "y": 0.5,
                           "pressure": 300}, True)
        handle_message(s, {"type": "tick"}, True)
        assert s.frame == 1
        replies, _ = handle_message(s, {"type": "clear"}, True)
        assert s.frame == 0
        assert replies[0]["count"] == 0


class TestLiveSession:
    def test_idle_cadence_no_events(self, session_parts):
        s = fresh_session(session_parts)
        events = 0
        scan_counts = []
        for _ in range(1000):
            batch = s.tick()
            msgs = by_type(batch)
            events += len(msgs["events"]["events"])
            scan_counts.append(msgs["scan_stats"]["frame_scans"])
        assert events == 0
        # full column sweeps only on the re-detection cadence
        for t, scans in enumerate(scan_counts):
            assert scans == (16 if t % 24 == 0 else 0)

    def test_touch_emits_events_and_hotspot(self, session_parts):
        s = fresh_session(session_parts)
        for _ in range(4):
            s.ingest_touch(0.6, 0.3, 350.0)
            batch = s.tick()
        msgs = by_type(batch)
        assert msgs["events"]["events"]
        hot = msgs["hotspot"]
        assert abs(hot["r"] - round(0.3 * 15)) <= 1
        assert abs(hot["c"] - round(0.6 * 15)) <= 1

    def test_touch_does_not_persist(self, session_parts):
        s = fresh_session(session_parts)
        s.ingest_touch(0.5, 0.5, 400.0)
        s.tick()
        batch = s.tick()  # next frame is untouched: field decays immediately
        msgs = by_type(batch)
        negs = [e for e in msgs["events"]["events"] if e[1] == -1]
        assert negs  # release events fire

    def test_zero_pressure_ignored(self, session_parts):
        s = fresh_session(session_parts)
        s.ingest_touch(0.5, 0.5, 0.0)
        assert not s.pending_field.any()

    def test_classify_matches_batch_forward(self, session_parts):
        spec, weights, scales, _ = session_parts
        s = LiveSession(spec, weights, scales)
        rng = np.random.default_rng(0)
        for t in range(60):
            if t % 3 != 2:
                s.ingest_touch(float(rng.uniform(0.2, 0.8)),
                               float(rng.uniform(0.2, 0.8)), 300.0)
            s.tick()
        scores = s.classify_window()
        want, _ = conv_snn_forward(s.window_spikes(), weights, spec,
                                   scales=scales)
        assert np.array_equal(scores, want)

    def test_rolling_scores_match_window_recount(self, session_parts):
        s = fresh_session(session_parts)
        rng = np.random.default_rng(1)
        for t in range(50):
            s.ingest_touch(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)),
                           250.0)
            batch = s.tick()
        scores = by_type(batch)["scores"]["scores"]
        assert scores == pytest.approx(np.sum(list(s.out_history), axis=0))

    def test_event_stream_is_valid(self, session_parts):
        s = fresh_session(session_parts)
        for _ in range(10):
            s.ingest_touch(0.4, 0.7, 300.0)
            s.tick()
        s.event_stream().validate()


class TestCoalesce:
    def test_merges_events_keeps_latest_status(self):
        queue = []
        for t in range(QUEUE_LIMIT + 10):
            queue.append({"type": "events", "frame": t, "events": [[t, 1, t]]})
            queue.append({"type": "scan_stats", "frame": t, "count": t})
        out = coalesce(queue)
        msgs = by_type(out)
        assert msgs["events"]["coalesced"] is True
        assert len(msgs["events"]["events"]) == QUEUE_LIMIT + 10
        assert msgs["scan_stats"]["count"] == QUEUE_LIMIT + 9

    def test_empty_queue(self):
        assert coalesce([]) == []


@pytest.fixture(scope="module")
def client():
    from fastapi.testclient import TestClient

    app = create_app(checkpoint=None, lockstep=True)
    with TestClient(app) as c:
        yield c


class TestHttp:
    def test_healthz(self, client):
        body = client.get("/healthz").json()
        assert body["protocol"] == PROTOCOL_VERSION
        assert body["lockstep"] is True
        assert body["checkpoint_hash"] == "uninitialized"

    def test_websocket_lockstep_roundtrip(self, client):
        with client.websocket_connect("/stream") as ws:
            ws.send_text(json.dumps({"type": "hello", "grid": 16}))
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            ws.send_text(json.dumps({"type": "touch", "x": 0.5, "y": 0.5,
                                     "pressure": 350}))
            ws.send_text(json.dumps({"type": "tick"}))
            got = {}
            for _ in range(4):  # events, hotspot, scan_stats, scores
                msg = json.loads(ws.receive_text())
                got[msg["type"]] = msg
            assert {"events", "hotspot", "scan_stats", "scores"} <= got.keys()
            assert got["scan_stats"]["mode"] == "tracking"

    def test_websocket_bad_json(self, client):
        with client.websocket_connect("/stream") as ws:
            ws.send_text("not json")
            msg = json.loads(ws.receive_text())
            assert msg["type"] == "error" and msg["code"] == "schema"

    def test_websocket_binary_events(self, client):
        with client.websocket_connect("/stream") as ws:
            ws.send_text(json.dumps({"type": "hello", "grid": 16,
                                     "binary": True}))
            hello = json.loads(ws.receive_text())
            assert hello["binary"] is True
            ws.send_text(json.dumps({"type": "touch", "x": 0.5, "y": 0.5,
                                     "pressure": 350}))
            ws.send_text(json.dumps({"type": "tick"}))
            stream = read_aer(ws.receive_bytes())
            assert stream.event_count > 0


class TestOnlineBatchEquivalence:
    def test_scripted_sessions_bit_identical(self, session_parts):
        # drive scripted touch sequences frame by frame and compare the
        # final rolling scores against one batch forward of the same spikes
        spec, weights, scales, _ = session_parts
        rng = np.random.default_rng(42)
        for trial in range(5):
            s = LiveSession(spec, weights, scales)
            n_frames = int(rng.integers(30, 120))
            for t in range(n_frames):
                if rng.random() < 0.7:
                    s.ingest_touch(float(rng.uniform(0, 1)),
                                   float(rng.uniform(0, 1)),
                                   float(rng.uniform(100, 500)))
                s.tick()
            batch_scores, _ = conv_snn_forward(s.window_spikes(), weights,
                                               spec, scales=scales)
            assert np.array_equal(s.window_counts, batch_scores)
