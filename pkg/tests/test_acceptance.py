"""Acceptance gate: every headline guarantee of the package, one test each.

Each test prints a single summary line (visible with ``pytest -v -s`` or in
the failure report) and enforces both the numeric tolerance and the runtime
budget of its guarantee. The end-to-end and sweep tests train real networks
and dominate the suite's runtime (several minutes each).
"""

import time

import numpy as np
import pytest

from eskin.acquisition import acquire_sample
from eskin.bench import delta_sweep, scan_benchmark, simulate_scan_counts
from eskin.codec import (
    EventStream,
    compression_stats,
    delta_decode,
    delta_encode,
    read_aer,
    write_aer,
)
from eskin.dataset import build_dataset
from eskin.network import (
    FCSpec,
    LIFParams,
    NetworkSpec,
    conv2d,
    conv_snn_forward,
    event_driven_conv,
    init_weights,
    snn_fc_spec,
)
from eskin.quantize import quantize_weights, weight_memory_bytes
from eskin.scan import expected_scan_counts, scan_binary_search
from eskin.sensor import GRID_COLS, GRID_ROWS
from eskin.service import LiveSession, load_scoring_weights
from eskin.training import (
    cross_entropy,
    softmax,
    spiking_backward_train,
    spiking_forward_train,
    train_cnn,
    train_spiking,
)


def report(name, detail, elapsed, budget):
    line = f"ACCEPTANCE {name}: PASS ({detail}, {elapsed:.1f}s/{budget:.0f}s)"
    print(line, flush=True)
    assert elapsed < budget, f"{name} exceeded its {budget}s runtime budget"


@pytest.fixture(scope="module")
def full_dataset():
    return build_dataset()  # 765 samples, seed 0


@pytest.fixture(scope="module")
def trained(full_dataset):
    ds = full_dataset
    t0 = time.monotonic()
    conv = train_spiking(ds.spikes, ds.labels, ds.train_idx, ds.test_idx)
    snn = train_spiking(ds.spikes.reshape(len(ds.spikes), 240, -1), ds.labels,
                        ds.train_idx, ds.test_idx, spec=snn_fc_spec())
    cnn = train_cnn(ds.maps, ds.labels, ds.train_idx, ds.test_idx)
    return conv, snn, cnn, time.monotonic() - t0


def touch_field(r, c):
    field = np.zeros((GRID_ROWS, GRID_COLS))
    field[r, c] = 300.0
    return field


def test_scan_counts():
    t0 = time.monotonic()
    counts = []
    for r in range(GRID_ROWS):
        for c in range(GRID_COLS):
            _, trace = scan_binary_search(touch_field(r, c))
            counts.append(trace.scan_count)
    assert max(counts) == 20
    assert np.mean(counts) == 12.5
    stats = expected_scan_counts(256)
    assert stats.ratio_vs_frame == pytest.approx(256 / 20) == pytest.approx(12.8)
    assert stats.ratio_vs_rowcol == pytest.approx(32 / 20) == pytest.approx(1.6)
    assert stats.avg_scans == 12
    sim_avg, _ = simulate_scan_counts(256)
    assert abs(stats.avg_scans - sim_avg) <= 1
    report("scan counts", f"worst=20 mean=12.5 formula={stats.avg_scans}",
           time.monotonic() - t0, 1.0)


def test_localization():
    t0 = time.monotonic()
    for r in range(GRID_ROWS):
        for c in range(GRID_COLS):
            located, _ = scan_binary_search(touch_field(r, c))
            assert located == {(r, c)}
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = (int(rng.integers(GRID_ROWS)), int(rng.integers(GRID_COLS)))
        b = (int(rng.integers(GRID_ROWS)), int(rng.integers(GRID_COLS)))
        while b == a:
            b = (int(rng.integers(GRID_ROWS)), int(rng.integers(GRID_COLS)))
        field = touch_field(*a) + touch_field(*b)
        located, _ = scan_binary_search(field, multi_touch=True)
        assert {a, b} <= located  # no false negatives
    report("localization", "256 exact + 1000 two-touch supersets",
           time.monotonic() - t0, 10.0)


def test_codec_arithmetic_and_roundtrip():
    t0 = time.monotonic()
    rng = np.random.default_rng(1)
    key = np.sort(rng.choice(240 * 256, 609, replace=False)).astype(np.int64)
    ts, addr = np.divmod(key, 256)
    stream = EventStream(rows=16, cols=16, frame_count=240, delta=6,
                         addresses=addr, timestamps=ts,
                         polarities=rng.choice([-1, 1], 609))
    stats = compression_stats(stream, adc_bits=12)
    assert stats.sparsity == pytest.approx(0.9901, abs=5e-5)
    assert 36 <= stats.compression_ratio <= 39
    for _ in range(10000):
        n_ev = int(rng.integers(0, 120))
        key = (np.sort(rng.choice(240 * 256, n_ev, replace=False)).astype(np.int64)
               if n_ev else np.zeros(0, np.int64))
        ts, addr = np.divmod(key, 256)
        s = EventStream(rows=16, cols=16, frame_count=240,
                        delta=int(rng.integers(1, 40)), addresses=addr,
                        timestamps=ts,
                        polarities=rng.choice([-1, 1], n_ev).astype(np.int64),
                        label=int(rng.integers(0, 10)))
        back = read_aer(write_aer(s))
        assert np.array_equal(back.addresses, s.addresses)
        assert np.array_equal(back.timestamps, s.timestamps)
        assert np.array_equal(back.polarities, s.polarities)
        assert (back.rows, back.cols, back.frame_count, back.delta, back.label) \
            == (s.rows, s.cols, s.frame_count, s.delta, s.label)
    report("codec arithmetic",
           f"sparsity={stats.sparsity:.4f} ratio={stats.compression_ratio:.1f} "
           "roundtrips=10000", time.monotonic() - t0, 60.0)


def test_reconstruction_bound():
    t0 = time.monotonic()
    rng = np.random.default_rng(2)
    for _ in range(1000):
        delta = int(rng.integers(1, 20))
        steps = rng.integers(-delta, delta + 1, (40, 4, 4))
        frames = np.cumsum(steps, axis=0) + 2048
        stream = delta_encode(frames, delta)
        recon = delta_decode(stream) + frames[0]
        assert np.max(np.abs(recon - frames)) < delta
    report("reconstruction bound", "1000 step-limited signals within delta",
           time.monotonic() - t0, 30.0)


def test_memory_accounting():
    t0 = time.monotonic()
    assert weight_memory_bytes(71440, 5) == 44650
    assert weight_memory_bytes(71440, 32) == 285760
    ratio = weight_memory_bytes(71440, 5) / weight_memory_bytes(71440, 32)
    assert ratio == pytest.approx(0.1563, abs=5e-4)
    report("memory accounting", f"44650/285760 bytes, ratio={ratio:.4f}",
           time.monotonic() - t0, 1.0)


def test_sparse_inference_equivalence():
    t0 = time.monotonic()
    rng = np.random.default_rng(3)
    w = rng.integers(-15, 16, (6, 2, 3, 3)).astype(np.int64)
    for _ in range(1000):
        x = ((rng.random((2, 16, 16)) < 0.05)
             * rng.choice([-1, 1], (2, 16, 16))).astype(np.int64)
        acc = np.zeros((6, 16, 16), np.int64)
        ch, r, c = np.nonzero(x)
        event_driven_conv((ch, r, c, x[ch, r, c]), w, acc)
        assert np.array_equal(acc, conv2d(x[None], w)[0])
    # MAC counter vs brute-force multiplication count on small grids
    w2 = rng.integers(-3, 4, (3, 1, 3, 3)).astype(np.int64)
    for h in (4, 6, 8):
        for _ in range(30):
            x = ((rng.random((1, h, h)) < 0.25)
                 * rng.choice([-1, 1], (1, h, h))).astype(np.int64)
            acc = np.zeros((3, h, h), np.int64)
            ch, r, c = np.nonzero(x)
            macs = event_driven_conv((ch, r, c, x[ch, r, c]), w2, acc)
            brute = 0
            for ri, ci in zip(r, c):
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if 0 <= ri + dy < h and 0 <= ci + dx < h:
                            brute += 3
            assert macs == brute
    report("sparse inference", "1000 bit-exact trials + exact MAC counts",
           time.monotonic() - t0, 60.0)


def test_gradient_check():
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    spec = NetworkSpec("snn", (FCSpec(256, 12), FCSpec(12, 9))).validate_chain()
    weights = [{"W": w["W"].astype(np.float64), "b": w["b"].astype(np.float64)}
               for w in init_weights(spec, seed=4)]
    params = LIFParams()
    x = ((rng.random((2, 10, 256)) < 0.08).astype(np.float64)
         - (rng.random((2, 10, 256)) < 0.04).astype(np.float64))
    labels0 = np.array([0, 8])

    def loss_fn():
        counts, caches = spiking_forward_train(x, spec, weights, params, soft=True)
        return cross_entropy(softmax(0.25 * counts), labels0), counts, caches

    loss, counts, caches = loss_fn()
    probs = softmax(0.25 * counts)
    gcounts = 0.25 * (probs - np.eye(9)[labels0]) / 2
    grads = spiking_backward_train(gcounts, spec, weights, params, caches)
    eps = 1e-6
    worst = 0.0
    rng2 = np.random.default_rng(8)
    for li in range(2):
        flat = weights[li]["W"].reshape(-1)
        gflat = grads[li]["W"].reshape(-1)
        for _ in range(12):
            k = rng2.integers(flat.size)
            old = flat[k]
            flat[k] = old + eps
            lp = loss_fn()[0]
            flat[k] = old - eps
            lm = loss_fn()[0]
            flat[k] = old
            fd = (lp - lm) / (2 * eps)
            worst = max(worst, abs(fd - gflat[k]) / max(1e-8, abs(fd), abs(gflat[k])))
    assert worst < 1e-4
    report("gradient check", f"max relative error {worst:.2e}",
           time.monotonic() - t0, 120.0)


def test_end_to_end_learning(full_dataset, trained):
    t0 = time.monotonic()
    ds = full_dataset
    conv, snn, cnn, train_seconds = trained
    conv_acc = conv.curves[-1]["test_acc"]
    snn_acc = snn.curves[-1]["test_acc"]
    cnn_acc = cnn.curves[-1]["test_acc"]
    assert conv_acc >= 0.90
    assert conv_acc >= snn_acc
    assert conv_acc >= cnn_acc
    # 5-bit quantization and forward sparsity on the event-driven path
    q = quantize_weights(conv.weights, 5)
    idx = ds.test_idx
    hits = 0
    sparsities = []
    for i in idx:
        scores, stats = conv_snn_forward(ds.spikes[i], q.codes, scales=q.scales)
        hits += int(np.argmax(scores) == ds.labels[i] - 1)
        sparsities.append(stats.average_sparsity)
    quant_acc = hits / len(idx)
    assert conv_acc - quant_acc <= 0.03
    avg_sparsity = float(np.mean(sparsities))
    assert avg_sparsity >= 0.99
    elapsed = train_seconds + (time.monotonic() - t0)
    report("end-to-end learning",
           f"conv={conv_acc:.3f} snn={snn_acc:.3f} cnn={cnn_acc:.3f} "
           f"quant={quant_acc:.3f} sparsity={avg_sparsity:.4f}",
           elapsed, 600.0)


def test_delta_sweep_shape():
    t0 = time.monotonic()
    rows = delta_sweep()
    acc = [r["test_accuracy"] for r in rows]
    comp = [r["compression_mean"] for r in rows]
    best = int(np.argmax(acc))
    assert 0 < best < len(rows) - 1, f"no interior accuracy maximum: {acc}"
    assert acc[best] > acc[0] and acc[best] > acc[-1]
    assert all(b >= a for a, b in zip(comp, comp[1:])), \
        f"compression not monotone: {comp}"
    report("delta sweep",
           f"best delta={rows[best]['delta']} acc={acc[best]:.3f} "
           f"endpoints=({acc[0]:.3f}, {acc[-1]:.3f})",
           time.monotonic() - t0, 1800.0)


def test_dynamic_range_gain():
    t0 = time.monotonic()
    stats = expected_scan_counts(256)
    assert stats.dr_gain == pytest.approx(256 / 9)
    assert stats.dr_gain == pytest.approx(28.44, abs=0.005)
    row = scan_benchmark(sizes=(256,))[0]
    assert row["dr_gain"] == stats.dr_gain
    report("dynamic range gain", f"dr_gain={stats.dr_gain:.2f}",
           time.monotonic() - t0, 1.0)


def test_online_batch_equivalence():
    t0 = time.monotonic()
    spec, weights, scales, _ = load_scoring_weights(None)
    rng = np.random.default_rng(9)
    for script in range(20):
        n_frames = int(rng.integers(40, 240))
        session = LiveSession(spec, weights, scales)
        fields = np.zeros((n_frames, GRID_ROWS, GRID_COLS))
        online_events = []
        for t in range(n_frames):
            if rng.random() < 0.6:
                for _ in range(int(rng.integers(1, 3))):
                    session.ingest_touch(float(rng.uniform(0, 1)),
                                         float(rng.uniform(0, 1)),
                                         float(rng.uniform(100, 500)))
            fields[t] = session.pending_field
            batch = session.tick()
            for msg in batch:
                if msg["type"] == "events":
                    online_events.extend(tuple(e) for e in msg["events"])
        # batch pipeline over the identical pressure-field script
        stream = acquire_sample(fields, delta=session.delta)
        batch_events = [(int(a), int(p), int(ts)) for a, p, ts in
                        zip(stream.addresses, stream.polarities,
                            stream.timestamps)]
        assert sorted(online_events) == sorted(batch_events)
        batch_scores, _ = conv_snn_forward(session.window_spikes(), weights,
                                           spec, scales=scales)
        assert np.array_equal(session.window_counts, batch_scores)
    report("online/batch equivalence", "20 scripts bit-identical",
           time.monotonic() - t0, 120.0)
