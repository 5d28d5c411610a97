"""Delta-modulation event encoding and the .taer AER container.

Each pixel tracks a reference level; whenever the signal moves at least
``delta`` codes away from it, one signed event is emitted and the reference
steps by exactly ``delta`` (level-crossing convention, at most one event
per pixel per frame). Events are serialized as (address, polarity,
timestamp) records behind a fixed 16-byte header.
"""

import struct
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from .backend import jit

MAGIC = b"TAER"
FORMAT_VERSION = 1
HEADER_SIZE = 16
RECORD_SIZE = 4


class AERFormatError(ValueError):
    """Raised on any malformed .taer payload."""


class AEREvent(NamedTuple):
    address: int
    timestamp: int
    polarity: int  # -1 or +1


@dataclass
class EventStream:
    """Time-ordered ternary events for one sample.

    Stored as parallel arrays; ``addresses[i] = row*cols + col``.
    """

    rows: int
    cols: int
    frame_count: int
    delta: int
    addresses: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, np.int64))
    timestamps: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, np.int64))
    polarities: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, np.int64))
    label: int = 0  # digit 1-9, or 0 when unlabeled

    def __post_init__(self):
        self.addresses = np.asarray(self.addresses, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.polarities = np.asarray(self.polarities, dtype=np.int64)
        n = self.addresses.size
        if self.timestamps.size != n or self.polarities.size != n:
            raise ValueError("event arrays must have equal length")
        if self.rows * self.cols > 256:
            raise ValueError("addresses must fit in one byte (rows*cols <= 256)")

    @property
    def event_count(self) -> int:
        return int(self.addresses.size)

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols

    def events(self):
        for a, t, p in zip(self.addresses, self.timestamps, self.polarities):
            yield AEREvent(int(a), int(t), int(p))

    def validate(self):
        if np.any((self.polarities != 1) & (self.polarities != -1)):
            raise ValueError("polarity must be +1 or -1")
        if np.any(self.addresses < 0) or np.any(self.addresses >= self.n_pixels):
            raise ValueError("address out of range")
        if np.any(self.timestamps < 0) or np.any(self.timestamps >= self.frame_count):
            raise ValueError("timestamp out of range")
        order = np.lexsort((self.addresses, self.timestamps))
        if not np.array_equal(order, np.arange(self.event_count)):
            raise ValueError("events must be sorted by (timestamp, address)")
        key = self.timestamps * self.n_pixels + self.addresses
        if np.unique(key).size != key.size:
            raise ValueError("duplicate (timestamp, address) event")
        return self

    def to_spike_tensor(self) -> np.ndarray:
        """Ternary (T, rows, cols) int8 tensor with one value per event."""
        out = np.zeros((self.frame_count, self.rows, self.cols), dtype=np.int8)
        r, c = np.divmod(self.addresses, self.cols)
        out[self.timestamps, r, c] = self.polarities.astype(np.int8)
        return out


def _delta_encode_kernel(flat, delta, ts_out, addr_out, pol_out):
    t_frames, n_pix = flat.shape
    ref = flat[0].astype(np.int64).copy()
    k = 0
    for t in range(1, t_frames):
        for p in range(n_pix):
            v = flat[t, p]
            if v - ref[p] >= delta:
                ts_out[k] = t
                addr_out[k] = p
                pol_out[k] = 1
                ref[p] += delta
                k += 1
            elif ref[p] - v >= delta:
                ts_out[k] = t
                addr_out[k] = p
                pol_out[k] = -1
                ref[p] -= delta
                k += 1
    return k


_delta_encode_jit = jit(_delta_encode_kernel)


def delta_encode(frames: np.ndarray, delta: int, label: int = 0) -> EventStream:
    """Encode a (T, rows, cols) ADC-code sequence into an event stream.

    The per-pixel reference starts at the frame-0 value, so frame 0 never
    emits; each later frame emits at most one event per pixel.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    frames = np.asarray(frames)
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise ValueError("frames must be (T, rows, cols) with T >= 1")
    t_frames, rows, cols = frames.shape
    flat = frames.reshape(t_frames, rows * cols).astype(np.int64)
    cap = max(1, (t_frames - 1) * rows * cols)
    ts = np.empty(cap, np.int64)
    addr = np.empty(cap, np.int64)
    pol = np.empty(cap, np.int64)
    k = _delta_encode_jit(flat, int(delta), ts, addr, pol)
    return EventStream(
        rows=rows, cols=cols, frame_count=t_frames, delta=int(delta),
        addresses=addr[:k].copy(), timestamps=ts[:k].copy(),
        polarities=pol[:k].copy(), label=label,
    )


class DeltaEncoderState:
    """Incremental per-pixel encoder for acquisition-coupled encoding.

    Only pixels visited by the scanner in a given frame get a comparator
    decision; unvisited pixels keep their reference untouched. References
    start at zero (the rest state of the array).
    """

    def __init__(self, rows: int, cols: int, delta: int):
        if delta < 1:
            raise ValueError("delta must be >= 1")
        self.rows, self.cols, self.delta = rows, cols, int(delta)
        self.ref = np.zeros(rows * cols, dtype=np.int64)

    def step(self, codes: np.ndarray, visited_mask: np.ndarray, t: int):
        """Process frame t; returns (addresses, polarities) of emitted events."""
        flat = codes.reshape(-1).astype(np.int64)
        mask = visited_mask.reshape(-1)
        diff = flat - self.ref
        pos = mask & (diff >= self.delta)
        neg = mask & (-diff >= self.delta)
        self.ref[pos] += self.delta
        self.ref[neg] -= self.delta
        addrs = np.concatenate([np.flatnonzero(pos), np.flatnonzero(neg)])
        pols = np.concatenate([
            np.ones(int(pos.sum()), np.int64), -np.ones(int(neg.sum()), np.int64)
        ])
        order = np.argsort(addrs, kind="stable")
        return addrs[order], pols[order]


def delta_decode(stream: EventStream) -> np.ndarray:
    """Staircase reconstruction relative to frame 0 (starts at zero)."""
    ts = stream.timestamps
    if ts.size and np.any(np.diff(ts) < 0):
        raise AERFormatError("events out of order")
    out = np.zeros((stream.frame_count, stream.rows, stream.cols), dtype=np.int64)
    if stream.event_count:
        steps = np.zeros((stream.frame_count, stream.n_pixels), dtype=np.int64)
        np.add.at(steps, (ts, stream.addresses), stream.polarities * stream.delta)
        out = np.cumsum(steps, axis=0).reshape(stream.frame_count, stream.rows, stream.cols)
    return out


def write_aer(stream: EventStream) -> bytes:
    """Serialize to the little-endian .taer container (bit-exact)."""
    stream.validate()
    if stream.frame_count > 0xFFFF or stream.delta > 0xFFFF:
        raise AERFormatError("frame_count and delta must fit in 16 bits")
    header = struct.pack(
        "<4sBBBBHHI",
        MAGIC, FORMAT_VERSION, stream.rows, stream.cols, stream.label,
        stream.frame_count, stream.delta, stream.event_count,
    )
    rec = np.empty((stream.event_count, RECORD_SIZE), dtype=np.uint8)
    rec[:, 0] = stream.addresses.astype(np.uint8)
    rec[:, 1] = (stream.polarities > 0).astype(np.uint8)
    ts = stream.timestamps.astype("<u2")
    rec[:, 2:4] = ts.view(np.uint8).reshape(-1, 2)
    return header + rec.tobytes()


def read_aer(data: bytes) -> EventStream:
    """Parse a .taer payload; every corruption raises AERFormatError."""
    if len(data) < HEADER_SIZE:
        raise AERFormatError("truncated header")
    magic, version, rows, cols, label, frame_count, delta, event_count = struct.unpack(
        "<4sBBBBHHI", data[:HEADER_SIZE]
    )
    if magic != MAGIC:
        raise AERFormatError("bad magic")
    if version != FORMAT_VERSION:
        raise AERFormatError(f"unsupported version {version}")
    if rows * cols == 0 or rows * cols > 256:
        raise AERFormatError("invalid grid dimensions")
    if delta < 1:
        raise AERFormatError("invalid delta")
    expected = HEADER_SIZE + RECORD_SIZE * event_count
    if len(data) != expected:
        raise AERFormatError(
            f"payload size mismatch: header declares {event_count} events "
            f"({expected} bytes), got {len(data)}"
        )
    rec = np.frombuffer(data, dtype=np.uint8, offset=HEADER_SIZE).reshape(-1, RECORD_SIZE)
    pol_bytes = rec[:, 1]
    if np.any(pol_bytes > 1):
        raise AERFormatError("invalid polarity byte")
    stream = EventStream(
        rows=rows, cols=cols, frame_count=frame_count, delta=delta,
        addresses=rec[:, 0].astype(np.int64),
        timestamps=np.ascontiguousarray(rec[:, 2:4]).view("<u2").reshape(-1).astype(np.int64),
        polarities=pol_bytes.astype(np.int64) * 2 - 1,
        label=label,
    )
    try:
        stream.validate()
    except ValueError as exc:
        raise AERFormatError(str(exc)) from exc
    return stream


@dataclass(frozen=True)
class CompressionStats:
    event_count: int
    positive_count: int
    negative_count: int
    sparsity: float
    compression_ratio: float
    storage_saving: float

    def to_dict(self):
        return {
            "event_count": self.event_count,
            "positive_count": self.positive_count,
            "negative_count": self.negative_count,
            "sparsity": self.sparsity,
            "compression_ratio": self.compression_ratio,
            "storage_saving": self.storage_saving,
        }


def compression_stats(stream: EventStream, adc_bits: int = 12) -> CompressionStats:
    """Compare the AER payload against densely packed raw frames."""
    raw_bytes = stream.frame_count * stream.n_pixels * adc_bits / 8.0
    aer_bytes = HEADER_SIZE + RECORD_SIZE * stream.event_count
    total_slots = stream.frame_count * stream.n_pixels
    return CompressionStats(
        event_count=stream.event_count,
        positive_count=int(np.sum(stream.polarities > 0)),
        negative_count=int(np.sum(stream.polarities < 0)),
        sparsity=1.0 - stream.event_count / total_slots,
        compression_ratio=raw_bytes / aer_bytes,
        storage_saving=1.0 - aer_bytes / raw_bytes,
    )


def firing_rate_histogram(stream: EventStream, bins: int = 20):
    """Per-pixel spikes-per-frame rates plus a binned histogram."""
    counts = np.bincount(stream.addresses, minlength=stream.n_pixels)
    rates = counts / stream.frame_count
    hist, edges = np.histogram(rates, bins=bins, range=(0.0, max(rates.max(), 1e-9)))
    return rates, (hist, edges)
