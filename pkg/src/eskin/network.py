"""Network topologies, LIF dynamics, and the two inference paths.

The Conv-SNN is two 3x3 convolutions plus a fully connected readout, all
driving LIF populations; classification is the argmax of output-spike
counts accumulated over the sample. Inference can run densely or
event-driven (zero-skipping): with integer weight codes both paths use
integer accumulation and agree bit-exactly, while the event path performs
multiplies only for nonzero inputs and meters exactly those MACs.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .backend import jit

GRID = 16
N_CLASSES = 9
T_STEPS = 240


@dataclass(frozen=True)
class ConvSpec:
    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    @property
    def param_count(self) -> int:
        return self.out_ch * (self.in_ch * self.kernel * self.kernel + 1)

    def dense_macs(self, height: int = GRID, width: int = GRID) -> int:
        return self.kernel * self.kernel * self.in_ch * self.out_ch * height * width


@dataclass(frozen=True)
class FCSpec:
    in_size: int
    out_size: int

    @property
    def param_count(self) -> int:
        return self.out_size * (self.in_size + 1)

    def dense_macs(self, height: int = GRID, width: int = GRID) -> int:
        return self.in_size * self.out_size


@dataclass(frozen=True)
class NetworkSpec:
    kind: str  # "cnn", "snn", "conv_snn"
    layers: tuple

    @property
    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.layers)

    def validate_chain(self, in_shape=(1, GRID, GRID), n_out=N_CLASSES):
        ch, h, w = in_shape
        for layer in self.layers:
            if isinstance(layer, ConvSpec):
                if layer.in_ch != ch:
                    raise ValueError(f"conv expects {layer.in_ch} channels, got {ch}")
                ch = layer.out_ch
            else:
                if layer.in_size != ch * h * w:
                    raise ValueError(f"fc expects {layer.in_size} inputs, got {ch * h * w}")
                ch, h, w = layer.out_size, 1, 1
        if ch * h * w != n_out:
            raise ValueError(f"network ends with {ch * h * w} outputs, expected {n_out}")
        return self


def conv_snn_spec() -> NetworkSpec:
    return NetworkSpec("conv_snn", (
        ConvSpec(1, 8), ConvSpec(8, 30), FCSpec(30 * GRID * GRID, N_CLASSES),
    )).validate_chain()


def cnn_spec() -> NetworkSpec:
    return NetworkSpec("cnn", (
        ConvSpec(1, 8), ConvSpec(8, 30), FCSpec(30 * GRID * GRID, N_CLASSES),
    )).validate_chain()


def snn_fc_spec(hidden: int = 268) -> NetworkSpec:
    return NetworkSpec("snn", (
        FCSpec(GRID * GRID, hidden), FCSpec(hidden, N_CLASSES),
    )).validate_chain()


def init_weights(spec: NetworkSpec, seed: int = 0, scale: float = 1.0):
    """He-style initialization; returns [{'W': ..., 'b': ...}] per layer."""
    rng = np.random.default_rng(np.random.SeedSequence([0x11A7, int(seed)]))
    weights = []
    for layer in spec.layers:
        if isinstance(layer, ConvSpec):
            fan_in = layer.in_ch * layer.kernel * layer.kernel
            w = rng.normal(0, scale * np.sqrt(2.0 / fan_in),
                           (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel))
        else:
            fan_in = layer.in_size
            w = rng.normal(0, scale * np.sqrt(2.0 / fan_in), (layer.out_size, layer.in_size))
        weights.append({"W": w.astype(np.float32), "b": np.zeros(w.shape[0], np.float32)})
    return weights


# -- LIF dynamics -----------------------------------------------------------

@dataclass(frozen=True)
class LIFParams:
    decay: float = 0.9
    threshold: float = 1.0
    reset: str = "subtract"  # or "zero"

    def __post_init__(self):
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.reset not in ("subtract", "zero"):
            raise ValueError("reset must be 'subtract' or 'zero'")


def lif_step(v, i, params: LIFParams = LIFParams()):
    """One discrete LIF update; returns (v_next, spikes in {0,1})."""
    v = np.asarray(v, dtype=np.float64)
    i = np.asarray(i, dtype=np.float64)
    if v.shape != i.shape:
        raise ValueError("membrane and current shapes must match")
    v_pre = params.decay * v + i
    spikes = (v_pre >= params.threshold).astype(np.float64)
    if params.reset == "subtract":
        v_next = v_pre - params.threshold * spikes
    else:
        v_next = np.where(spikes > 0, 0.0, v_pre)
    return v_next, spikes


# -- dense convolution (pad 1, stride 1, 3x3) -------------------------------

def conv2d(x, w, b=None):
    """Batched 3x3 same-convolution via 9 shifted matmuls.

    x: (B, Cin, H, W) of any numeric dtype; result dtype follows numpy
    promotion, so integer inputs with integer kernels stay integer.
    """
    bsz, cin, h, wd = x.shape
    cout = w.shape[0]
    out_dtype = np.result_type(x.dtype, w.dtype)
    out = np.zeros((bsz, cout, h, wd), dtype=out_dtype)
    for ky in range(3):
        for kx in range(3):
            dy, dx = ky - 1, kx - 1
            ys0, ys1 = max(0, dy), min(h, h + dy)
            xs0, xs1 = max(0, dx), min(wd, wd + dx)
            yo0, yo1 = max(0, -dy), min(h, h - dy)
            xo0, xo1 = max(0, -dx), min(wd, wd - dx)
            patch = x[:, :, ys0:ys1, xs0:xs1]
            contrib = np.tensordot(patch, w[:, :, ky, kx], axes=([1], [1]))
            out[:, :, yo0:yo1, xo0:xo1] += np.moveaxis(contrib, -1, 1)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1).astype(out_dtype, copy=False)
    return out


# -- event-driven (zero-skipping) convolution --------------------------------

def _event_conv_kernel(ev_ch, ev_r, ev_c, ev_val, w, acc, h, wd):
    macs = 0
    cout = w.shape[0]
    for n in range(len(ev_r)):
        ci, r, c, val = ev_ch[n], ev_r[n], ev_c[n], ev_val[n]
        for ky in range(3):
            y = r - (ky - 1)
            if y < 0 or y >= h:
                continue
            for kx in range(3):
                x = c - (kx - 1)
                if x < 0 or x >= wd:
                    continue
                for o in range(cout):
                    acc[o, y, x] += val * w[o, ci, ky, kx]
                macs += cout
    return macs


_event_conv_jit = jit(_event_conv_kernel)


def event_driven_conv(events, w, acc):
    """Scatter one step's input events through a 3x3 kernel.

    events: (channel, row, col, value) arrays with value in {-1, +1} (or
    any nonzero integer); ``acc`` is the (Cout, H, W) accumulator, updated
    in place. Returns the exact number of multiply-accumulates performed.
    """
    ev_ch, ev_r, ev_c, ev_val = (np.ascontiguousarray(a, dtype=np.int64) for a in events)
    if not (len(ev_ch) == len(ev_r) == len(ev_c) == len(ev_val)):
        raise ValueError("event arrays must have equal length")
    h, wd = acc.shape[1], acc.shape[2]
    return int(_event_conv_jit(ev_ch, ev_r, ev_c, ev_val,
                               np.ascontiguousarray(w), acc, h, wd))


# -- forward statistics ------------------------------------------------------

@dataclass
class ForwardStats:
    """MAC and sparsity accounting for one forward pass (or an average).

    ``density`` per layer is MAC-weighted: effective_macs / dense_macs,
    so the identity effective = sum(dense * density) is exact.
    """

    layer_names: list = dc_field(default_factory=list)
    dense_macs: list = dc_field(default_factory=list)
    effective_macs: list = dc_field(default_factory=list)
    spike_counts: list = dc_field(default_factory=list)

    @property
    def densities(self):
        return [e / d if d else 0.0 for e, d in zip(self.effective_macs, self.dense_macs)]

    @property
    def total_dense_macs(self):
        return sum(self.dense_macs)

    @property
    def total_effective_macs(self):
        return sum(self.effective_macs)

    @property
    def average_sparsity(self):
        total = self.total_dense_macs
        return 1.0 - self.total_effective_macs / total if total else 0.0

    def to_dict(self):
        return {
            "layers": [
                {"name": n, "dense_macs": int(d), "effective_macs": float(e),
                 "density": float(e / d if d else 0.0)}
                for n, d, e in zip(self.layer_names, self.dense_macs, self.effective_macs)
            ],
            "total_dense_macs": int(self.total_dense_macs),
            "total_effective_macs": float(self.total_effective_macs),
            "average_sparsity": float(self.average_sparsity),
            "spike_counts": [int(s) for s in self.spike_counts],
        }


def _layer_dense_macs(spec: NetworkSpec, t_steps: int):
    """Dense MAC budget per layer for a full unrolled forward pass."""
    return [layer.dense_macs() * t_steps for layer in spec.layers]


class SpikingStepper:
    """Incremental spiking forward pass: feed one input frame at a time.

    Holds LIF membranes and spike-count accumulators. Works for both the
    Conv-SNN and the FC-only SNN. Integer weight codes (with a dequantize
    scale) keep the synaptic accumulation exact, and the event-driven path
    is used whenever ``zero_skipping`` is set.
    """

    def __init__(self, spec: NetworkSpec, weights, params: LIFParams = LIFParams(),
                 zero_skipping: bool = True, scales=None):
        self.spec = spec
        self.weights = weights
        self.params = params
        self.zero_skipping = zero_skipping
        self.scales = scales if scales is not None else [1.0] * len(spec.layers)
        self.v = []
        shape_ch, h, w = 1, GRID, GRID
        for layer in spec.layers:
            if isinstance(layer, ConvSpec):
                self.v.append(np.zeros((layer.out_ch, h, w), np.float64))
                shape_ch = layer.out_ch
            else:
                self.v.append(np.zeros(layer.out_size, np.float64))
                shape_ch, h, w = layer.out_size, 1, 1
        self.counts = np.zeros(N_CLASSES, np.float64)
        self.stats = ForwardStats()
        for i, layer in enumerate(spec.layers):
            self.stats.layer_names.append(f"{'conv' if isinstance(layer, ConvSpec) else 'fc'}{i + 1}")
            self.stats.dense_macs.append(0)
            self.stats.effective_macs.append(0)
            self.stats.spike_counts.append(0)
        self.steps = 0

    def step(self, frame: np.ndarray) -> np.ndarray:
        """Advance one time step; frame is (16, 16) ternary (or (256,) for FC nets).

        Returns this step's output spikes (per class).
        """
        x = np.asarray(frame)
        if isinstance(self.spec.layers[0], FCSpec):
            x = x.reshape(-1)
        else:
            x = x.reshape(1, GRID, GRID)
        for i, layer in enumerate(self.spec.layers):
            w, b = self.weights[i]["W"], self.weights[i]["b"]
            self.stats.dense_macs[i] += layer.dense_macs()
            if isinstance(layer, ConvSpec):
                if self.zero_skipping:
                    ch, r, c = np.nonzero(x)
                    acc = np.zeros((layer.out_ch, GRID, GRID),
                                   np.int64 if np.issubdtype(w.dtype, np.integer) else np.float64)
                    macs = event_driven_conv((ch, r, c, x[ch, r, c]), w, acc)
                    self.stats.effective_macs[i] += macs
                    current = acc
                else:
                    current = conv2d(x[None], w)[0]
                    self.stats.effective_macs[i] += _valid_overlap_macs(x, layer.out_ch)
                x_in = current.astype(np.float64) * self.scales[i] + b.reshape(-1, 1, 1)
            else:
                flat = x.reshape(-1)
                nz = np.nonzero(flat)[0]
                self.stats.effective_macs[i] += len(nz) * layer.out_size
                if self.zero_skipping:
                    if np.issubdtype(w.dtype, np.integer):
                        acc = (w[:, nz] @ flat[nz].astype(np.int64)) if len(nz) else np.zeros(layer.out_size, np.int64)
                    else:
                        acc = w[:, nz] @ flat[nz] if len(nz) else np.zeros(layer.out_size)
                else:
                    acc = w @ flat.astype(w.dtype if np.issubdtype(w.dtype, np.integer) else np.float64)
                x_in = acc.astype(np.float64) * self.scales[i] + b
            v_pre = self.params.decay * self.v[i] + x_in
            spikes = (v_pre >= self.params.threshold)
            if self.params.reset == "subtract":
                self.v[i] = v_pre - self.params.threshold * spikes
            else:
                self.v[i] = np.where(spikes, 0.0, v_pre)
            x = spikes.astype(np.int64)
            self.stats.spike_counts[i] += int(x.sum())
        self.counts += x.reshape(-1)
        self.steps += 1
        return x.reshape(-1)

    def scores(self) -> np.ndarray:
        return self.counts.copy()


def _valid_overlap_macs(x, cout):
    """Brute-force effective MACs of a 3x3 same-conv on input x (nonzeros only)."""
    h, w = x.shape[-2], x.shape[-1]
    ch, r, c = np.nonzero(x.reshape(-1, h, w))
    ky_valid = np.minimum(r + 1, h - 1) - np.maximum(r - 1, 0) + 1
    kx_valid = np.minimum(c + 1, w - 1) - np.maximum(c - 1, 0) + 1
    return int(np.sum(ky_valid * kx_valid) * cout)


def conv_snn_forward(spikes, weights, spec: NetworkSpec = None,
                     params: LIFParams = LIFParams(), zero_skipping: bool = True,
                     scales=None):
    """Full-sample spiking forward pass.

    spikes: (T, 16, 16) ternary tensor. Returns (class scores, ForwardStats);
    scores are output-spike counts, argmax (smallest index on ties) decides.
    """
    spec = spec or conv_snn_spec()
    spikes = np.asarray(spikes)
    if spikes.ndim != 3 or spikes.shape[1:] != (GRID, GRID):
        raise ValueError(f"expected (T, {GRID}, {GRID}) spike tensor, got {spikes.shape}")
    stepper = SpikingStepper(spec, weights, params, zero_skipping, scales)
    for t in range(spikes.shape[0]):
        stepper.step(spikes[t])
    return stepper.scores(), stepper.stats


def snn_fc_forward(spikes, weights, spec: NetworkSpec = None,
                   params: LIFParams = LIFParams(), zero_skipping: bool = True,
                   scales=None):
    """Plain fully connected SNN baseline on the flattened spike tensor."""
    spec = spec or snn_fc_spec()
    spikes = np.asarray(spikes).reshape(spikes.shape[0], -1)
    stepper = SpikingStepper(spec, weights, params, zero_skipping, scales)
    for t in range(spikes.shape[0]):
        stepper.step(spikes[t])
    return stepper.scores(), stepper.stats


def cnn_forward(image, weights, spec: NetworkSpec = None):
    """Conventional conv-conv-FC forward with ReLU on an accumulated map.

    Densities are measured on each layer's (post-activation) inputs.
    Returns (class scores, ForwardStats).
    """
    spec = spec or cnn_spec()
    x = np.asarray(image, dtype=np.float64).reshape(1, 1, GRID, GRID)
    stats = ForwardStats()
    for i, layer in enumerate(spec.layers):
        w = weights[i]["W"].astype(np.float64)
        b = weights[i]["b"].astype(np.float64)
        name = f"{'conv' if isinstance(layer, ConvSpec) else 'fc'}{i + 1}"
        dense = layer.dense_macs()
        if isinstance(layer, ConvSpec):
            effective = _valid_overlap_macs(x[0], layer.out_ch)
            x = conv2d(x, w, b)
        else:
            flat = x.reshape(-1)
            effective = int(np.count_nonzero(flat)) * layer.out_size
            x = (w @ flat + b).reshape(1, -1, 1, 1)
        stats.layer_names.append(name)
        stats.dense_macs.append(dense)
        stats.effective_macs.append(effective)
        if i < len(spec.layers) - 1:
            x = np.maximum(x, 0.0)
        stats.spike_counts.append(int(np.count_nonzero(x)))
    return x.reshape(-1), stats
