"""Symmetric uniform weight quantization and checkpoint persistence."""

import io
import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class QuantizedWeights:
    """Per-layer integer codes with a shared dequantization scale each."""

    codes: list      # [{'W': int8 array, 'b': float32 array}] per layer
    scales: list     # float per layer (applies to W codes)
    bits: int

    def dequantize(self):
        return [
            {"W": (layer["W"].astype(np.float32) * s).astype(np.float32),
             "b": layer["b"].copy()}
            for layer, s in zip(self.codes, self.scales)
        ]


def quantize_weights(weights, bits: int = 5) -> QuantizedWeights:
    """Per-layer symmetric quantization, scale = max|w| / (2^(bits-1) - 1).

    Rounds to nearest (ties to even). Biases stay float: they enter the
    accumulator once per step, outside the multiply path.
    """
    if not 2 <= bits <= 8:
        raise ValueError("bits must be in [2, 8]")
    qmax = (1 << (bits - 1)) - 1
    codes, scales = [], []
    for layer in weights:
        w = np.asarray(layer["W"], dtype=np.float64)
        peak = float(np.max(np.abs(w))) if w.size else 0.0
        if peak == 0.0:
            scales.append(0.0)
            codes.append({"W": np.zeros(w.shape, np.int8), "b": layer["b"].copy()})
            continue
        scale = peak / qmax
        q = np.clip(np.round(w / scale), -qmax - 1, qmax).astype(np.int8)
        scales.append(scale)
        codes.append({"W": q, "b": layer["b"].copy()})
    return QuantizedWeights(codes=codes, scales=scales, bits=bits)


def weight_memory_bytes(parameter_count: int, bits: int) -> int:
    """Storage for parameter_count weights at the given bit width, packed."""
    if parameter_count < 0 or bits < 0:
        raise ValueError("counts must be non-negative")
    return (parameter_count * bits + 7) // 8


def save_checkpoint(path, kind: str, weights, quantized: QuantizedWeights | None = None,
                    meta: dict | None = None):
    """Versioned binary checkpoint: layer table + float weights (+ codes)."""
    table = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "n_layers": len(weights),
        "meta": meta or {},
    }
    arrays = {}
    for i, layer in enumerate(weights):
        arrays[f"w{i}"] = layer["W"]
        arrays[f"b{i}"] = layer["b"]
    if quantized is not None:
        table["bits"] = quantized.bits
        table["scales"] = [float(s) for s in quantized.scales]
        for i, layer in enumerate(quantized.codes):
            arrays[f"q{i}"] = layer["W"]
    arrays["table"] = np.frombuffer(json.dumps(table).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Returns (kind, weights, quantized or None, meta)."""
    with np.load(path) as data:
        table = json.loads(bytes(data["table"]).decode())
        if table["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {table['version']}")
        weights = [
            {"W": data[f"w{i}"], "b": data[f"b{i}"]} for i in range(table["n_layers"])
        ]
        quantized = None
        if "bits" in table:
            quantized = QuantizedWeights(
                codes=[{"W": data[f"q{i}"], "b": data[f"b{i}"]}
                       for i in range(table["n_layers"])],
                scales=table["scales"],
                bits=table["bits"],
            )
    return table["kind"], weights, quantized, table.get("meta", {})
