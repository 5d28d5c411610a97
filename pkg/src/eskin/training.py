"""Training: surrogate-gradient BPTT for the spiking nets, backprop for the CNN.

The spike nonlinearity uses a rectangular surrogate window of width 1
around the threshold; the reset path is differentiated through the same
surrogate. Time is folded into the batch axis for all synaptic layers, so
the only sequential work is the elementwise LIF scan (numba-compiled, with
a numpy fallback).

Dense float32 tensors of shape (batch, time, features) flow through
training; the event-driven integer path in :mod:`eskin.network` is for
inference only.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .backend import USE_NUMBA, jit
from .network import (
    ConvSpec,
    FCSpec,
    GRID,
    LIFParams,
    N_CLASSES,
    NetworkSpec,
    cnn_spec,
    conv_snn_spec,
    init_weights,
    snn_fc_spec,
)


class TrainingError(RuntimeError):
    """Loss became non-finite; carries the diagnostics dict."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# -- LIF scans over (B, T, F) -------------------------------------------------

def _lif_scan_fwd(cur, decay, theta, spikes, gate):
    b, t_steps, feat = cur.shape
    for bi in range(b):
        v = np.zeros(feat, np.float32)
        for t in range(t_steps):
            for f in range(feat):
                v_pre = decay * v[f] + cur[bi, t, f]
                s = np.uint8(1) if v_pre >= theta else np.uint8(0)
                spikes[bi, t, f] = s
                gate[bi, t, f] = np.uint8(1) if (theta - 0.5 < v_pre < theta + 0.5) else np.uint8(0)
                v[f] = v_pre - theta * s


def _lif_scan_bwd(gs, gate, decay, theta, gcur):
    b, t_steps, feat = gs.shape
    for bi in range(b):
        gv = np.zeros(feat, np.float32)
        for t in range(t_steps - 1, -1, -1):
            for f in range(feat):
                if gate[bi, t, f]:
                    g_pre = gs[bi, t, f] + gv[f] * (1.0 - theta)
                else:
                    g_pre = gv[f]
                gcur[bi, t, f] = g_pre
                gv[f] = decay * g_pre


def _lif_scan_fwd_np(cur, decay, theta, spikes, gate):
    """Vectorized fallback: loop over time only."""
    b, t_steps, feat = cur.shape
    v = np.zeros((b, feat), np.float32)
    for t in range(t_steps):
        v_pre = decay * v + cur[:, t]
        s = v_pre >= theta
        spikes[:, t] = s
        gate[:, t] = (v_pre > theta - 0.5) & (v_pre < theta + 0.5)
        v = v_pre - theta * s


def _lif_scan_bwd_np(gs, gate, decay, theta, gcur):
    b, t_steps, feat = gs.shape
    gv = np.zeros((b, feat), np.float32)
    for t in range(t_steps - 1, -1, -1):
        g = gate[:, t].astype(np.float32)
        g_pre = gs[:, t] * g + gv * (1.0 - theta * g)
        gcur[:, t] = g_pre
        gv = decay * g_pre


_lif_scan_fwd_jit = jit(_lif_scan_fwd) if USE_NUMBA else _lif_scan_fwd_np
_lif_scan_bwd_jit = jit(_lif_scan_bwd) if USE_NUMBA else _lif_scan_bwd_np


def lif_scan_forward(cur, params: LIFParams, soft: bool = False):
    """Run LIF dynamics along axis 1 of (B, T, F) input currents.

    Returns (spikes, gate) where gate is the rectangular surrogate
    derivative evaluated at each pre-reset potential. ``soft`` replaces the
    hard step with its piecewise-linear relaxation (gradient checks only).
    """
    if soft:
        # Gradient-check path: keep the incoming precision (float64 FD needs it).
        return _lif_scan_forward_soft(np.ascontiguousarray(cur), params)
    cur = np.ascontiguousarray(cur, dtype=np.float32)
    spikes = np.empty(cur.shape, np.uint8)
    gate = np.empty(cur.shape, np.uint8)
    _lif_scan_fwd_jit(cur, np.float32(params.decay), np.float32(params.threshold),
                      spikes, gate)
    return spikes, gate


def _lif_scan_forward_soft(cur, params):
    b, t_steps, feat = cur.shape
    spikes = np.empty_like(cur)
    gate = np.empty_like(cur)
    v = np.zeros((b, feat), cur.dtype)
    theta = params.threshold
    for t in range(t_steps):
        v_pre = params.decay * v + cur[:, t]
        s = np.clip(v_pre - theta + 0.5, 0.0, 1.0)
        spikes[:, t] = s
        gate[:, t] = ((v_pre > theta - 0.5) & (v_pre < theta + 0.5)).astype(cur.dtype)
        v = v_pre - theta * s
    return spikes, gate


def lif_scan_backward(gs, gate, params: LIFParams):
    """Backpropagate through the LIF scan; returns grads w.r.t. input currents."""
    if gs.dtype == np.float64 or gate.dtype == np.float64:
        # High-precision path used by the gradient check.
        b, t_steps, feat = gs.shape
        gcur = np.empty_like(gs, dtype=np.float64)
        gv = np.zeros((b, feat), np.float64)
        for t in range(t_steps - 1, -1, -1):
            g_pre = gs[:, t] * gate[:, t] + gv * (1.0 - params.threshold * gate[:, t])
            gcur[:, t] = g_pre
            gv = params.decay * g_pre
        return gcur
    gs = np.ascontiguousarray(gs, dtype=np.float32)
    gcur = np.empty_like(gs)
    _lif_scan_bwd_jit(gs, np.ascontiguousarray(gate),
                      np.float32(params.decay), np.float32(params.threshold), gcur)
    return gcur


# -- synaptic layers over folded (B*T) batches --------------------------------
#
# Training runs channels-last ((N, H, W, C) folded over batch*time) so the
# 3x3 convolutions become a single im2col GEMM per layer instead of nine
# strided accumulations. Weights stay in the canonical (Cout, Cin, 3, 3) /
# (out, Cin*H*W) layout used by inference; the FC readout's columns are
# permuted on the fly.

def _im2col(x):
    """(N, H, W, C) -> (N*H*W, C*9) patches of a padded 3x3 window."""
    n, h, w, c = x.shape
    xpad = np.zeros((n, h + 2, w + 2, c), x.dtype)
    xpad[:, 1:h + 1, 1:w + 1, :] = x
    win = np.lib.stride_tricks.sliding_window_view(xpad, (3, 3), axis=(1, 2))
    return np.ascontiguousarray(win).reshape(n * h * w, c * 9)


def _col2im(gcols, shape):
    """Adjoint of _im2col: scatter-add patch grads back to (N, H, W, C)."""
    n, h, w, c = shape
    g = gcols.reshape(n, h, w, c, 3, 3)
    gxpad = np.zeros((n, h + 2, w + 2, c), gcols.dtype)
    for ky in range(3):
        for kx in range(3):
            gxpad[:, ky:ky + h, kx:kx + w, :] += g[:, :, :, :, ky, kx]
    return gxpad[:, 1:h + 1, 1:w + 1, :]


def _conv_wmat(w, dtype):
    """(Cout, Cin, 3, 3) kernel -> (Cin*9, Cout) GEMM matrix."""
    return np.ascontiguousarray(w.transpose(1, 2, 3, 0).reshape(-1, w.shape[0]), dtype=dtype)


def _fc_w_cl(w, channels, dtype):
    """Permute FC columns from (C, H, W) flatten order to (H, W, C)."""
    out = w.reshape(w.shape[0], channels, GRID, GRID).transpose(0, 2, 3, 1)
    return np.ascontiguousarray(out.reshape(w.shape[0], -1), dtype=dtype)


def _fc_w_cl_to_cf(w_cl, channels):
    """Inverse of _fc_w_cl, for gradients of the readout weights."""
    out = w_cl.reshape(w_cl.shape[0], GRID, GRID, channels).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out.reshape(w_cl.shape[0], -1))


# Spiking layers go further: their inputs are spike tensors at a few percent
# density, so the multiply work is driven from the nonzero entries instead.
# Only the gradients w.r.t. layer inputs stay dense GEMMs (the incoming
# gradient has no zeros to skip).

def _sparse_conv_fwd(idx, vals, w_t, out, cin):
    """Scatter input nonzeros through a 3x3 kernel.

    idx: flat indices into (N, H, W, cin); w_t: (3, 3, cin, cout);
    out: (N, H, W, cout) pre-filled with the bias.
    """
    h, wd, cout = out.shape[1], out.shape[2], out.shape[3]
    for i in range(idx.size):
        k = idx[i]
        c = k % cin
        k //= cin
        x = k % wd
        k //= wd
        y = k % h
        n = k // h
        v = vals[i]
        for ky in range(3):
            oy = y + 1 - ky
            if oy < 0 or oy >= h:
                continue
            for kx in range(3):
                ox = x + 1 - kx
                if ox < 0 or ox >= wd:
                    continue
                for co in range(cout):
                    out[n, oy, ox, co] += v * w_t[ky, kx, c, co]


def _sparse_conv_wgrad(idx, vals, gout, gw_t, cin):
    """Kernel gradient from input nonzeros; gw_t (3, 3, cin, cout) in place."""
    h, wd, cout = gout.shape[1], gout.shape[2], gout.shape[3]
    for i in range(idx.size):
        k = idx[i]
        c = k % cin
        k //= cin
        x = k % wd
        k //= wd
        y = k % h
        n = k // h
        v = vals[i]
        for ky in range(3):
            oy = y + 1 - ky
            if oy < 0 or oy >= h:
                continue
            for kx in range(3):
                ox = x + 1 - kx
                if ox < 0 or ox >= wd:
                    continue
                for co in range(cout):
                    gw_t[ky, kx, c, co] += v * gout[n, oy, ox, co]


def _sparse_fc_fwd(idx, vals, w_t, out):
    """idx: flat indices into (N, f_in); w_t: (f_in, f_out); out pre-biased."""
    f_in, f_out = w_t.shape
    for i in range(idx.size):
        k = idx[i]
        j = k % f_in
        n = k // f_in
        v = vals[i]
        for o in range(f_out):
            out[n, o] += v * w_t[j, o]


def _sparse_fc_wgrad(idx, vals, gout, gw_t):
    """Weight gradient, transposed (f_in, f_out) for contiguous accumulation."""
    f_in, f_out = gw_t.shape
    for i in range(idx.size):
        k = idx[i]
        j = k % f_in
        n = k // f_in
        v = vals[i]
        for o in range(f_out):
            gw_t[j, o] += v * gout[n, o]


def _sparse_conv_fwd_np(idx, vals, w_t, out, cin):
    h, wd = out.shape[1], out.shape[2]
    c = idx % cin
    x = (idx // cin) % wd
    y = (idx // (cin * wd)) % h
    n = idx // (cin * wd * h)
    for ky in range(3):
        oy = y + 1 - ky
        for kx in range(3):
            ox = x + 1 - kx
            ok = (oy >= 0) & (oy < h) & (ox >= 0) & (ox < wd)
            np.add.at(out, (n[ok], oy[ok], ox[ok]),
                      vals[ok, None] * w_t[ky, kx, c[ok]])


def _sparse_conv_wgrad_np(idx, vals, gout, gw_t, cin):
    h, wd = gout.shape[1], gout.shape[2]
    c = idx % cin
    x = (idx // cin) % wd
    y = (idx // (cin * wd)) % h
    n = idx // (cin * wd * h)
    for ky in range(3):
        oy = y + 1 - ky
        for kx in range(3):
            ox = x + 1 - kx
            ok = (oy >= 0) & (oy < h) & (ox >= 0) & (ox < wd)
            np.add.at(gw_t, (ky, kx, c[ok]),
                      vals[ok, None] * gout[n[ok], oy[ok], ox[ok]])


def _sparse_fc_fwd_np(idx, vals, w_t, out):
    f_in = w_t.shape[0]
    np.add.at(out, idx // f_in, vals[:, None] * w_t[idx % f_in])


def _sparse_fc_wgrad_np(idx, vals, gout, gw_t):
    f_in = gw_t.shape[0]
    np.add.at(gw_t, idx % f_in, vals[:, None] * gout[idx // f_in])


if USE_NUMBA:
    _sparse_conv_fwd = jit(_sparse_conv_fwd)
    _sparse_conv_wgrad = jit(_sparse_conv_wgrad)
    _sparse_fc_fwd = jit(_sparse_fc_fwd)
    _sparse_fc_wgrad = jit(_sparse_fc_wgrad)
else:
    _sparse_conv_fwd = _sparse_conv_fwd_np
    _sparse_conv_wgrad = _sparse_conv_wgrad_np
    _sparse_fc_fwd = _sparse_fc_fwd_np
    _sparse_fc_wgrad = _sparse_fc_wgrad_np


def _conv_input_grad_cl(gout, w, dtype):
    """Dense gradient w.r.t. a conv layer's input, channels-last.

    gout: (N, H, W, cout); w: (cout, cin, 3, 3). One small GEMM per tap.
    """
    n, h, wd, cout = gout.shape
    cin = w.shape[1]
    gf = gout.reshape(-1, cout)
    gpad = np.zeros((n, h + 2, wd + 2, cin), dtype)
    for ky in range(3):
        for kx in range(3):
            part = gf @ np.ascontiguousarray(w[:, :, ky, kx], dtype=dtype)
            gpad[:, ky:ky + h, kx:kx + wd, :] += part.reshape(n, h, wd, cin)
    return gpad[:, 1:h + 1, 1:wd + 1, :]


def _nonzeros(x, dtype):
    """Flat nonzero indices and values of an array, values cast to dtype."""
    flat = x.reshape(-1)
    idx = np.flatnonzero(flat)
    return idx, flat[idx].astype(dtype)


class _LayerCache:
    __slots__ = ("idx", "vals", "gate", "spikes", "in_channels")

    def __init__(self, idx, vals, gate, spikes, in_channels):
        self.idx = idx            # flat nonzero indices of the layer input
        self.vals = vals
        self.gate = gate
        self.spikes = spikes
        self.in_channels = in_channels


def spiking_forward_train(spikes_in, spec, weights, params, soft=False):
    """Unrolled training forward pass.

    spikes_in: (B, T, 16, 16) ternary input. Returns (output spike counts
    (B, 9), per-layer caches). Hidden activations are spike tensors at a few
    percent density, so synaptic currents come from nonzero scatter kernels;
    spatial layers run channels-last.
    """
    b, t_steps = spikes_in.shape[0], spikes_in.shape[1]
    n = b * t_steps
    dtype = np.float64 if spikes_in.dtype == np.float64 else np.float32
    caches = []
    x = spikes_in.reshape(n, GRID, GRID, 1)
    channels = 1
    for layer, wdict in zip(spec.layers, weights):
        w, bias = wdict["W"], wdict["b"]
        idx, vals = _nonzeros(x, dtype)
        if isinstance(layer, ConvSpec):
            w_t = np.ascontiguousarray(w.transpose(2, 3, 1, 0), dtype=dtype)
            cur = np.empty((n, GRID, GRID, layer.out_ch), dtype)
            cur[:] = bias.astype(dtype)
            _sparse_conv_fwd(idx, vals, w_t, cur, channels)
        else:
            if channels > 1:
                w_use = _fc_w_cl(w, channels, dtype)
            else:
                w_use = w.astype(dtype, copy=False)
            cur = np.empty((n, layer.out_size), dtype)
            cur[:] = bias.astype(dtype)
            _sparse_fc_fwd(idx, vals, np.ascontiguousarray(w_use.T), cur)
        s, gate = lif_scan_forward(cur.reshape(b, t_steps, -1), params, soft=soft)
        caches.append(_LayerCache(idx, vals, gate, s, channels))
        if isinstance(layer, ConvSpec):
            x = s.reshape(n, GRID, GRID, layer.out_ch)
            channels = layer.out_ch
        else:
            x = s.reshape(n, layer.out_size)
            channels = 1
    counts = caches[-1].spikes.reshape(b, t_steps, -1).sum(axis=1, dtype=np.float64)
    return counts.astype(dtype), caches


def spiking_backward_train(gcounts, spec, weights, params, caches,
                           rate_reg: float = 0.0):
    """BPTT through the cached forward pass; returns per-layer weight grads.

    ``rate_reg`` adds d/ds of an L1 penalty on hidden firing rates.
    Gradients come back in the canonical weight layout.
    """
    b, t_steps = caches[0].gate.shape[0], caches[0].gate.shape[1]
    n = b * t_steps
    dtype = np.float64 if gcounts.dtype == np.float64 else np.float32
    grads = [None] * len(spec.layers)
    last_f = caches[-1].gate.reshape(b, t_steps, -1).shape[2]
    gs = np.ascontiguousarray(
        np.broadcast_to(gcounts[:, None, :], (b, t_steps, last_f)), dtype=dtype)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer, wdict, cache = spec.layers[i], weights[i], caches[i]
        if rate_reg > 0.0 and i < len(spec.layers) - 1:
            gs = gs + dtype(rate_reg / cache.spikes.size)
        gcur = lif_scan_backward(gs.reshape(b, t_steps, -1), cache.gate, params)
        w = wdict["W"]
        cin = cache.in_channels
        if isinstance(layer, ConvSpec):
            gout = np.ascontiguousarray(gcur.reshape(n, GRID, GRID, layer.out_ch),
                                        dtype=dtype)
            gw_t = np.zeros((3, 3, cin, layer.out_ch), dtype)
            _sparse_conv_wgrad(cache.idx, cache.vals, gout, gw_t, cin)
            gw = gw_t.transpose(3, 2, 0, 1)
            gb = gout.reshape(-1, layer.out_ch).sum(axis=0)
            if i > 0:
                gs = _conv_input_grad_cl(gout, w, dtype).reshape(b, t_steps, -1)
        else:
            gout = np.ascontiguousarray(gcur.reshape(n, layer.out_size), dtype=dtype)
            gw_t = np.zeros((layer.in_size, layer.out_size), dtype)
            _sparse_fc_wgrad(cache.idx, cache.vals, gout, gw_t)
            gw_flat = gw_t.T
            if cin > 1:
                gw = _fc_w_cl_to_cf(gw_flat, cin)
                w_use = _fc_w_cl(w, cin, dtype)
            else:
                gw = gw_flat
                w_use = w.astype(dtype, copy=False)
            gb = gout.sum(axis=0)
            if i > 0:
                gs = (gout @ w_use).reshape(b, t_steps, -1)
        grads[i] = {"W": np.ascontiguousarray(gw), "b": gb}
    return grads


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, labels0):
    return float(-np.mean(np.log(np.maximum(probs[np.arange(len(labels0)), labels0], 1e-12))))


class Adam:
    def __init__(self, weights, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [{k: np.zeros_like(w[k], dtype=np.float32) for k in ("W", "b")} for w in weights]
        self.v = [{k: np.zeros_like(w[k], dtype=np.float32) for k in ("W", "b")} for w in weights]
        self.t = 0

    def step(self, weights, grads):
        self.t += 1
        bc1 = 1 - self.b1 ** self.t
        bc2 = 1 - self.b2 ** self.t
        for wd, gd, m, v in zip(weights, grads, self.m, self.v):
            for k in ("W", "b"):
                g = gd[k].astype(np.float32)
                m[k] = self.b1 * m[k] + (1 - self.b1) * g
                v[k] = self.b2 * v[k] + (1 - self.b2) * g * g
                wd[k] = (wd[k] - self.lr * (m[k] / bc1) / (np.sqrt(v[k] / bc2) + self.eps)).astype(np.float32)


@dataclass
class TrainResult:
    weights: list
    curves: list = dc_field(default_factory=list)  # per-epoch dicts
    spec: NetworkSpec = None


@dataclass
class SpikingHyper:
    epochs: int = 6
    batch_size: int = 16
    lr: float = 2e-3
    readout_scale: float = 0.1
    rate_reg: float = 0.05
    init_scale: float = 1.0
    out_bias: float = 0.1   # initial output-layer bias; keeps readout units live
    seed: int = 0


def _spiking_scores_batched(spikes, spec, weights, params, batch=32):
    """Dense float forward over many samples; returns spike counts (N, 9)."""
    out = np.zeros((len(spikes), N_CLASSES), np.float32)
    for i in range(0, len(spikes), batch):
        chunk = spikes[i:i + batch].astype(np.float32)
        counts, _ = spiking_forward_train(chunk, spec, weights, params)
        out[i:i + batch] = counts
    return out


def train_spiking(
    spikes: np.ndarray,          # (N, T, 16, 16) int8 ternary
    labels: np.ndarray,          # digits 1..9
    train_idx, test_idx,
    spec: NetworkSpec = None,
    params: LIFParams = LIFParams(),
    hyper: SpikingHyper = SpikingHyper(),
    verbose: bool = False,
) -> TrainResult:
    """Surrogate-gradient BPTT for the Conv-SNN or the FC SNN baseline."""
    spec = spec or conv_snn_spec()
    data = spikes
    labels0 = np.asarray(labels) - 1
    weights = init_weights(spec, seed=hyper.seed, scale=hyper.init_scale)
    if hyper.out_bias:
        weights[-1]["b"][:] = hyper.out_bias
    opt = Adam(weights, lr=hyper.lr)
    rng = np.random.default_rng(np.random.SeedSequence([0x7E4, int(hyper.seed)]))
    curves = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(train_idx)
        losses = []
        hits = 0
        for i in range(0, len(order), hyper.batch_size):
            idx = order[i:i + hyper.batch_size]
            batch = data[idx].astype(np.float32)
            counts, caches = spiking_forward_train(batch, spec, weights, params)
            logits = hyper.readout_scale * counts
            probs = softmax(logits)
            loss = cross_entropy(probs, labels0[idx])
            if not np.isfinite(loss):
                raise TrainingError("training diverged: non-finite loss", {
                    "epoch": epoch, "batch_start": i, "loss": loss,
                    "max_weight": max(float(np.abs(w["W"]).max()) for w in weights),
                })
            losses.append(loss)
            hits += int(np.sum(np.argmax(counts, axis=1) == labels0[idx]))
            gcounts = hyper.readout_scale * (probs - np.eye(N_CLASSES)[labels0[idx]]) / len(idx)
            grads = spiking_backward_train(gcounts.astype(np.float32), spec, weights,
                                           params, caches, rate_reg=hyper.rate_reg)
            opt.step(weights, grads)
        train_acc = hits / len(order)  # measured on pre-update batches
        test_acc = _accuracy(data, labels0, test_idx, spec, weights, params)
        curves.append({"epoch": epoch, "loss": float(np.mean(losses)),
                       "train_acc": train_acc, "test_acc": test_acc})
        if verbose:
            print(f"epoch {epoch}: loss={np.mean(losses):.4f} "
                  f"train={train_acc:.4f} test={test_acc:.4f}")
    return TrainResult(weights=weights, curves=curves, spec=spec)


def _accuracy(data, labels0, idx, spec, weights, params):
    if len(idx) == 0:
        return float("nan")
    counts = _spiking_scores_batched(data[idx], spec, weights, params)
    return float(np.mean(np.argmax(counts, axis=1) == labels0[idx]))


@dataclass
class CnnHyper:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0


def cnn_forward_train(x, weights):
    """Conv-ReLU-Conv-ReLU-FC on (B, 16, 16, 1); returns (logits, cache)."""
    n = len(x)
    cols1 = _im2col(x)
    a1 = cols1 @ _conv_wmat(weights[0]["W"], np.float32) + weights[0]["b"]
    r1 = np.maximum(a1, 0.0)
    c1 = a1.shape[1]
    cols2 = _im2col(r1.reshape(n, GRID, GRID, c1))
    a2 = cols2 @ _conv_wmat(weights[1]["W"], np.float32) + weights[1]["b"]
    r2 = np.maximum(a2, 0.0)
    c2 = a2.shape[1]
    flat = r2.reshape(n, -1)
    logits = flat @ _fc_w_cl(weights[2]["W"], c2, np.float32).T + weights[2]["b"]
    return logits, (cols1, a1, cols2, a2, flat)


def train_cnn(
    maps: np.ndarray,            # (N, 16, 16) accumulated maps in [0, 1]
    labels: np.ndarray,
    train_idx, test_idx,
    hyper: CnnHyper = CnnHyper(),
    verbose: bool = False,
) -> TrainResult:
    """Standard backprop for the frame-based CNN baseline."""
    spec = cnn_spec()
    data = maps.reshape(-1, GRID, GRID, 1).astype(np.float32)
    labels0 = np.asarray(labels) - 1
    weights = init_weights(spec, seed=hyper.seed)
    opt = Adam(weights, lr=hyper.lr)
    rng = np.random.default_rng(np.random.SeedSequence([0xC44, int(hyper.seed)]))
    curves = []
    eye = np.eye(N_CLASSES)
    for epoch in range(hyper.epochs):
        order = rng.permutation(train_idx)
        losses = []
        for i in range(0, len(order), hyper.batch_size):
            idx = order[i:i + hyper.batch_size]
            x = data[idx]
            logits, (cols1, a1, cols2, a2, flat) = cnn_forward_train(x, weights)
            probs = softmax(logits)
            loss = cross_entropy(probs, labels0[idx])
            if not np.isfinite(loss):
                raise TrainingError("training diverged: non-finite loss",
                                    {"epoch": epoch, "batch_start": i})
            losses.append(loss)
            c1, c2 = a1.shape[1], a2.shape[1]
            glogits = (probs - eye[labels0[idx]]).astype(np.float32) / len(idx)
            gw3 = _fc_w_cl_to_cf(glogits.T @ flat, c2)
            gb3 = glogits.sum(axis=0)
            gflat = glogits @ _fc_w_cl(weights[2]["W"], c2, np.float32)
            ga2 = gflat.reshape(a2.shape) * (a2 > 0)
            gwm2 = cols2.T @ ga2
            gw2 = gwm2.reshape(c1, 3, 3, c2).transpose(3, 0, 1, 2).copy()
            gb2 = ga2.sum(axis=0)
            gcols2 = ga2 @ _conv_wmat(weights[1]["W"], np.float32).T
            ga1 = _col2im(gcols2, (len(x), GRID, GRID, c1)).reshape(a1.shape) * (a1 > 0)
            gwm1 = cols1.T @ ga1
            gw1 = gwm1.reshape(1, 3, 3, c1).transpose(3, 0, 1, 2).copy()
            gb1 = ga1.sum(axis=0)
            opt.step(weights, [{"W": gw1, "b": gb1}, {"W": gw2, "b": gb2},
                               {"W": gw3, "b": gb3}])
        def acc(idx_set):
            if len(idx_set) == 0:
                return float("nan")
            logits, _ = cnn_forward_train(data[idx_set], weights)
            return float(np.mean(np.argmax(logits, axis=1) == labels0[idx_set]))
        curves.append({"epoch": epoch, "loss": float(np.mean(losses)),
                       "train_acc": acc(train_idx), "test_acc": acc(test_idx)})
        if verbose:
            print(f"epoch {epoch}: loss={np.mean(losses):.4f} "
                  f"train={curves[-1]['train_acc']:.4f} test={curves[-1]['test_acc']:.4f}")
    return TrainResult(weights=weights, curves=curves, spec=spec)
