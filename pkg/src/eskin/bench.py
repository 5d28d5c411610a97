"""Benchmark harness: scan-strategy curves, codec aggregates, the network
comparison table, the delta sweep, and kernel backend timings.

Every report carries the generating config so it can be regenerated
bit-identically from (config, seed).
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .backend import BACKEND, USE_NUMBA
from .codec import compression_stats
from .dataset import build_dataset
from .network import (
    LIFParams,
    cnn_forward,
    cnn_spec,
    conv_snn_forward,
    conv_snn_spec,
    snn_fc_forward,
    snn_fc_spec,
)
from .quantize import quantize_weights, weight_memory_bytes
from .scan import expected_scan_counts
from .sensor import FrontEndConfig
from .training import (
    CnnHyper,
    SpikingHyper,
    train_cnn,
    train_spiking,
)

DEFAULT_SWEEP_DELTAS = (1, 2, 4, 6, 8, 12, 16, 24, 40)


@dataclass
class BenchReport:
    """Container for any subset of the benchmark outputs."""

    scan_curves: list = dc_field(default_factory=list)
    codec_stats: dict = dc_field(default_factory=dict)
    table1: dict = dc_field(default_factory=dict)
    delta_sweep: list = dc_field(default_factory=list)
    kernels: list = dc_field(default_factory=list)
    config: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {
            "scan_curves": self.scan_curves,
            "codec_stats": self.codec_stats,
            "table1": self.table1,
            "delta_sweep": self.delta_sweep,
            "kernels": self.kernels,
            "config": self.config,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    def write_csv(self, out_dir):
        """One CSV per populated section; plain columns, plot-tool friendly."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, rows in (
            ("scan_curves", self.scan_curves),
            ("delta_sweep", self.delta_sweep),
            ("kernels", self.kernels),
        ):
            if rows:
                written.append(_write_rows_csv(out / f"{name}.csv", rows))
        if self.table1:
            written.append(_write_rows_csv(out / "table1.csv", self.table1["networks"]))
        return written


def _write_rows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path


# -- scan strategy curves ------------------------------------------------------

def simulate_scan_counts(n: int):
    """Exhaustive single-touch scan-count simulation on an abstract array.

    A touch at (row, col) costs col + 1 column sweeps plus log2(side) row
    halvings. Returns (mean, worst) over all n positions.
    """
    side = math.isqrt(n)
    halvings = int(math.log2(side))
    per_col = np.arange(1, side + 1) + halvings
    counts = np.repeat(per_col, side)  # every row in a column costs the same
    return float(counts.mean()), int(counts.max())


def scan_benchmark(sizes=(16, 64, 256, 1024, 4096)):
    """Closed-form and simulated scan counts for all three strategies."""
    rows = []
    for n in sizes:
        stats = expected_scan_counts(n)
        sim_avg, sim_worst = simulate_scan_counts(n)
        side = math.isqrt(n)
        rows.append({
            "n": n,
            "frame": n,
            "row_column": 2 * side,
            "binary_worst": stats.worst_scans,
            "binary_avg_formula": stats.avg_scans,
            "binary_avg_sim": sim_avg,
            "binary_worst_sim": sim_worst,
            "ratio_vs_frame": stats.ratio_vs_frame,
            "ratio_vs_rowcol": stats.ratio_vs_rowcol,
            "dr_gain": stats.dr_gain,
        })
    return rows


# -- codec aggregates ----------------------------------------------------------

def codec_report(streams, adc_bits: int = 12):
    """Mean/min/max compression and sparsity over a collection of streams."""
    stats = [compression_stats(s, adc_bits) for s in streams]
    ratios = np.array([s.compression_ratio for s in stats])
    spars = np.array([s.sparsity for s in stats])
    events = np.array([s.event_count for s in stats])
    return {
        "n_streams": len(stats),
        "adc_bits": adc_bits,
        "compression_mean": float(ratios.mean()),
        "compression_min": float(ratios.min()),
        "compression_max": float(ratios.max()),
        "sparsity_mean": float(spars.mean()),
        "sparsity_min": float(spars.min()),
        "events_mean": float(events.mean()),
    }


# -- network comparison table --------------------------------------------------

def _eval_network(kind, weights, dataset, idx, scales=None):
    """Accuracy + mean forward stats of one network over dataset[idx]."""
    hits = 0
    eff = 0.0
    dense = 0
    sparsities = []
    for i in idx:
        if kind == "cnn":
            scores, stats = cnn_forward(dataset.maps[i], weights)
        elif kind == "snn":
            scores, stats = snn_fc_forward(
                dataset.spikes[i].reshape(len(dataset.spikes[i]), -1),
                weights, scales=scales)
        else:
            scores, stats = conv_snn_forward(dataset.spikes[i], weights, scales=scales)
        hits += int(np.argmax(scores) == dataset.labels[i] - 1)
        eff += stats.total_effective_macs
        dense = stats.total_dense_macs
        sparsities.append(stats.average_sparsity)
    n = len(idx)
    return {
        "accuracy": hits / n,
        "effective_kmacs": eff / n / 1e3,
        "dense_kmacs": dense / 1e3,
        "avg_sparsity": float(np.mean(sparsities)),
    }


def table1_report(dataset, cnn_weights, snn_weights, conv_weights, bits: int = 5):
    """Side-by-side comparison of the three trained networks on the test split.

    Memory uses 32-bit weights for the CNN and ``bits``-bit for both spiking
    nets. Accuracy cells report the quantized spiking nets (float values are
    logged alongside); the CNN stays float.
    """
    idx = dataset.test_idx
    specs = {"cnn": cnn_spec(), "snn": snn_fc_spec(), "conv_snn": conv_snn_spec()}
    weights = {"cnn": cnn_weights, "snn": snn_weights, "conv_snn": conv_weights}
    rows = []
    for kind in ("cnn", "snn", "conv_snn"):
        params = specs[kind].param_count
        wbits = 32 if kind == "cnn" else bits
        row = {
            "network": kind,
            "parameters": params,
            "weight_bits": wbits,
            "memory_bytes": weight_memory_bytes(params, wbits),
        }
        if kind == "cnn":
            row.update(_eval_network(kind, weights[kind], dataset, idx))
            row["accuracy_float"] = row["accuracy"]
        else:
            q = quantize_weights(weights[kind], bits=bits)
            quant = _eval_network(kind, q.codes, dataset, idx, scales=q.scales)
            float_acc = _eval_network(kind, weights[kind], dataset, idx)["accuracy"]
            row.update(quant)
            row["accuracy_float"] = float_acc
        rows.append(row)
    by = {r["network"]: r for r in rows}
    ratios = {
        "memory_ratio_snn_vs_cnn": by["conv_snn"]["memory_bytes"] / by["cnn"]["memory_bytes"],
        "compute_ratio_conv_snn_vs_cnn":
            by["conv_snn"]["effective_kmacs"] / by["cnn"]["effective_kmacs"],
        "sparsity_ordering": sorted(
            ("conv_snn", "snn", "cnn"), key=lambda k: -by[k]["avg_sparsity"]),
    }
    return {"networks": rows, "ratios": ratios, "bits": bits,
            "n_test": len(idx), "seed": dataset.seed}


# -- delta sweep -----------------------------------------------------------------

DEFAULT_SWEEP_NOISE = 0.004  # volts; ~6.5 ADC codes of front-end noise
# Low-gain front end for the sweep: touch codes stay mid-scale (tens of
# codes) instead of saturating the ADC, so a coarse delta threshold
# genuinely discards signal amplitude. The detection threshold scales down
# with the gain.
DEFAULT_SWEEP_RF = 50.0
DEFAULT_SWEEP_THRESHOLD = 12


def _sweep_point(delta, per_class, n_styles, seed, cfg, hyper, threshold):
    t0 = time.time()
    ds = build_dataset(per_class=per_class, n_styles=n_styles, seed=seed,
                       delta=int(delta), cfg=cfg,
                       activity_threshold=threshold)
    comp = codec_report(ds.streams)
    result = train_spiking(ds.spikes, ds.labels, ds.train_idx, ds.test_idx,
                           hyper=hyper)
    return {
        "delta": int(delta),
        "compression_mean": comp["compression_mean"],
        "sparsity_mean": comp["sparsity_mean"],
        "events_mean": comp["events_mean"],
        "test_accuracy": result.curves[-1]["test_acc"],
        "train_accuracy": result.curves[-1]["train_acc"],
        "seconds": round(time.time() - t0, 2),
    }


def delta_sweep(
    deltas=DEFAULT_SWEEP_DELTAS,
    per_class: int = 20,
    n_styles: int = 8,
    seed: int = 0,
    noise_sigma: float = DEFAULT_SWEEP_NOISE,
    hyper: SpikingHyper = None,
    verbose: bool = False,
    threads: int = 1,
    r_f: float = DEFAULT_SWEEP_RF,
    activity_threshold: int = DEFAULT_SWEEP_THRESHOLD,
):
    """Re-encode and retrain at each delta; report compression and accuracy.

    Sensor noise is injected so that small deltas flood the encoder with
    noise events while large deltas discard signal, exposing the interior
    accuracy maximum. Each sweep point owns its dataset and trainer, so the
    result is the same for any ``threads`` value.
    """
    if list(deltas) != sorted(deltas) or min(deltas) < 1:
        raise ValueError("deltas must be sorted and >= 1")
    hyper = hyper or SpikingHyper(epochs=6, seed=seed)
    cfg = FrontEndConfig(r_f=r_f, noise_sigma=noise_sigma)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(
                lambda d: _sweep_point(d, per_class, n_styles, seed, cfg,
                                       hyper, activity_threshold),
                deltas))
    else:
        rows = [_sweep_point(d, per_class, n_styles, seed, cfg, hyper,
                             activity_threshold)
                for d in deltas]
    if verbose:
        for row in rows:
            print(f"delta={row['delta']}: compression={row['compression_mean']:.1f} "
                  f"acc={row['test_accuracy']:.4f} ({row['seconds']}s)", flush=True)
    return rows


# -- kernel backend comparison ---------------------------------------------------

def _time_call(fn, *args, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_benchmark(seed: int = 0):
    """Time the compiled hot kernels against their plain-numpy fallbacks.

    Results are workload timings, not microbenchmarks; both variants compute
    identical outputs (asserted here).
    """
    from . import codec, training

    rng = np.random.default_rng(seed)
    rows = []

    # LIF scan over (8, 240, 2048)
    cur = rng.normal(0.2, 0.4, (8, 240, 2048)).astype(np.float32)
    args_fast = (cur, np.float32(0.9), np.float32(1.0))
    s1 = np.empty(cur.shape, np.uint8)
    g1 = np.empty(cur.shape, np.uint8)
    s2 = np.empty(cur.shape, np.uint8)
    g2 = np.empty(cur.shape, np.uint8)
    t_fast = _time_call(training._lif_scan_fwd_jit, *args_fast, s1, g1)
    t_np = _time_call(training._lif_scan_fwd_np, *args_fast, s2, g2)
    assert np.array_equal(s1, s2) and np.array_equal(g1, g2)
    rows.append({"kernel": "lif_scan_forward", "numba_s": t_fast if USE_NUMBA else None,
                 "numpy_s": t_np, "active_backend": BACKEND})

    # delta encoder over one dense 240-frame code movie
    codes = rng.integers(0, 4096, (240, 16, 16)).astype(np.int64)
    enc_fast = codec.delta_encode(codes, delta=6)
    t_enc = _time_call(codec.delta_encode, codes, 6)
    kernel = codec._delta_encode_jit
    py_kernel = kernel.py_func if hasattr(kernel, "py_func") else kernel

    def _encode_py():
        cap = 240 * 256
        out_ts = np.empty(cap, np.int64)
        out_addr = np.empty(cap, np.int64)
        out_pol = np.empty(cap, np.int64)
        return py_kernel(codes.reshape(240, 256), 6, out_ts, out_addr, out_pol)

    t_enc_py = _time_call(_encode_py)
    rows.append({"kernel": "delta_encode", "numba_s": t_enc if USE_NUMBA else None,
                 "numpy_s": t_enc_py, "active_backend": BACKEND,
                 "events": enc_fast.event_count})

    # sparse conv scatter at 2% input density
    x = (rng.random((3840, 16, 16, 8)) < 0.02).astype(np.float32)
    w_t = rng.normal(0, 0.1, (3, 3, 8, 30)).astype(np.float32)
    idx = np.flatnonzero(x.reshape(-1))
    vals = x.reshape(-1)[idx]
    out1 = np.zeros((3840, 16, 16, 30), np.float32)
    out2 = np.zeros((3840, 16, 16, 30), np.float32)
    t_sc = _time_call(training._sparse_conv_fwd, idx, vals, w_t, out1, 8, repeats=1)
    t_sc_np = _time_call(training._sparse_conv_fwd_np, idx, vals, w_t, out2, 8, repeats=1)
    assert np.allclose(out1, out2, atol=1e-4)
    rows.append({"kernel": "sparse_conv_forward", "numba_s": t_sc if USE_NUMBA else None,
                 "numpy_s": t_sc_np, "active_backend": BACKEND})

    for row in rows:
        if row["numba_s"]:
            row["speedup"] = row["numpy_s"] / row["numba_s"]
    return rows
