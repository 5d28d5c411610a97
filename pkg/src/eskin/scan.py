"""Scan strategies for the crossbar array.

Three ways to spend the shared ADC's scan budget:

* frame scan: one read per taxel (N scans),
* row-column scan: one all-rows read per column plus one per-row read
  (2*sqrt(N) scans), with the usual ghost-point ambiguity,
* binary scan search: sweep columns with all rows enabled until one flags,
  then halve the row set of that column until a single taxel remains.

After localization, sampling redistribution keeps re-reading only the 3x3
window around the hotspot and re-centers it on the pressure maximum.
"""

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .sensor import (
    FrontEndConfig,
    TaxelModel,
    column_group_read,
    parallel_resistance,
    pressure_to_resistance,
    readout_voltage,
    adc_sample,
    unpressed_column_code,
    GRID_ROWS,
    GRID_COLS,
)

DEFAULT_ACTIVITY_THRESHOLD = 64  # adc code, ~1.6% of 12-bit full scale


class AmbiguousLocalizationError(ValueError):
    """Threshold is at or below the all-unpressed column reading."""


@dataclass(frozen=True)
class ScanOp:
    rows: frozenset  # enabled row indices; for a row-pass read, the single row
    col: int         # column index, or -1 for a whole-row read
    code: int

    def rows_bitmask(self) -> int:
        m = 0
        for r in self.rows:
            m |= 1 << r
        return m


@dataclass
class ScanTrace:
    ops: list = dc_field(default_factory=list)

    @property
    def scan_count(self) -> int:
        return len(self.ops)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"rows": f"0x{op.rows_bitmask():04x}", "col": op.col, "code": op.code})
            for op in self.ops
        ]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class Hotspot:
    center: tuple        # (row, col)
    window: frozenset    # 3x3 taxel index set, clipped at borders
    peak_code: int


@dataclass(frozen=True)
class ScanStats:
    n: int
    avg_scans: float
    worst_scans: int
    ratio_vs_frame: float
    ratio_vs_rowcol: float
    dr_gain: float


class _Reader:
    """Wraps one scan session: every electrical read appends to the trace."""

    def __init__(self, field, model, cfg, rng=None, trace=None):
        self.field = field
        self.model = model
        self.cfg = cfg
        self.rng = rng
        self.trace = trace if trace is not None else ScanTrace()

    def read_column_group(self, rows, col) -> int:
        code = column_group_read(self.field, rows, col, self.model, self.cfg, self.rng)
        self.trace.ops.append(ScanOp(frozenset(int(r) for r in rows), int(col), code))
        return code

    def read_row_group(self, row) -> int:
        # Symmetric pass of the row-column strategy: the whole row is
        # paralleled and read in one scan.
        r_taxels = pressure_to_resistance(self.field[row, :], self.model)
        r_eq = parallel_resistance(np.atleast_1d(r_taxels))
        v = readout_voltage(r_eq, self.cfg)
        if self.cfg.noise_sigma > 0 and self.rng is not None:
            v = min(max(v + self.rng.normal(0.0, self.cfg.noise_sigma), 0.0), self.cfg.adc_full_scale)
        code = adc_sample(v, self.cfg)
        self.trace.ops.append(ScanOp(frozenset([int(row)]), -1, code))
        return code


def scan_frame_full(field, model=TaxelModel(), cfg=FrontEndConfig(), rng=None):
    """Read every taxel individually; returns (code grid, trace)."""
    reader = _Reader(field, model, cfg, rng)
    rows, cols = field.shape
    grid = np.zeros((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            grid[r, c] = reader.read_column_group([r], c)
    return grid, reader.trace


def scan_row_column(
    field,
    model=TaxelModel(),
    cfg=FrontEndConfig(),
    activity_threshold=DEFAULT_ACTIVITY_THRESHOLD,
    rng=None,
):
    """Row pass + column pass; returns the cross-product candidate set.

    Candidates are active_rows x active_cols, which includes ghost points
    for multi-touch fields.
    """
    reader = _Reader(field, model, cfg, rng)
    rows, cols = field.shape
    all_rows = list(range(rows))
    active_cols = [c for c in range(cols) if reader.read_column_group(all_rows, c) >= activity_threshold]
    active_rows = [r for r in range(rows) if reader.read_row_group(r) >= activity_threshold]
    candidates = {(r, c) for r in active_rows for c in active_cols}
    return candidates, reader.trace


def _locate_rows(reader, candidates, col, threshold, multi_touch):
    """Binary descent over the candidate row set of a flagged column."""
    if len(candidates) == 1:
        return [candidates[0]]
    half = len(candidates) // 2
    upper, lower = candidates[:half], candidates[half:]
    if multi_touch:
        found = []
        if reader.read_column_group(upper, col) >= threshold:
            found += _locate_rows(reader, upper, col, threshold, True)
        if reader.read_column_group(lower, col) >= threshold:
            found += _locate_rows(reader, lower, col, threshold, True)
        return found
    if reader.read_column_group(upper, col) >= threshold:
        return _locate_rows(reader, upper, col, threshold, False)
    return _locate_rows(reader, lower, col, threshold, False)


def scan_binary_search(
    field,
    model=TaxelModel(),
    cfg=FrontEndConfig(),
    activity_threshold=DEFAULT_ACTIVITY_THRESHOLD,
    multi_touch=False,
    rng=None,
):
    """Event-based binary scan search; returns (active taxel set, trace).

    Single-touch mode stops the column sweep at the first flagged column
    and descends only into the active half at each split, so a touch in
    column c (1-based) costs c + log2(rows) scans. Multi-touch mode sweeps
    all columns and descends into every active half.
    """
    rows, cols = field.shape
    if unpressed_column_code(rows, model, cfg) >= activity_threshold:
        raise AmbiguousLocalizationError(
            "activity threshold does not exceed the all-unpressed column reading"
        )
    reader = _Reader(field, model, cfg, rng)
    all_rows = list(range(rows))
    located = set()
    for c in range(cols):
        if reader.read_column_group(all_rows, c) >= activity_threshold:
            for r in _locate_rows(reader, all_rows, c, activity_threshold, multi_touch):
                located.add((r, c))
            if not multi_touch:
                break
    return located, reader.trace


def hotspot_window(center, rows=GRID_ROWS, cols=GRID_COLS) -> frozenset:
    """3x3 index set around center, clipped (not wrapped) at borders."""
    r0, c0 = center
    return frozenset(
        (r, c)
        for r in range(max(0, r0 - 1), min(rows, r0 + 2))
        for c in range(max(0, c0 - 1), min(cols, c0 + 2))
    )


class TouchLost(Exception):
    """The 3x3 window stayed inactive for too many consecutive steps."""

    def __init__(self, step, hotspots, patches, trace):
        super().__init__(f"touch lost at step {step}")
        self.step = step
        self.hotspots = hotspots
        self.patches = patches
        self.trace = trace


def read_window(reader, window):
    """Read each taxel of a window individually; returns {taxel: code}."""
    codes = {}
    for (r, c) in sorted(window):
        codes[(r, c)] = reader.read_column_group([r], c)
    return codes


def recenter(window_codes, activity_threshold=DEFAULT_ACTIVITY_THRESHOLD):
    """Argmax taxel of the window; ties broken by smallest (row, col).

    Returns None when no taxel reaches the threshold.
    """
    best = None
    best_code = -1
    for (r, c), code in sorted(window_codes.items()):
        if code > best_code:
            best, best_code = (r, c), code
    if best_code < activity_threshold:
        return None, best_code
    return best, best_code


def redistribute_sampling(
    fields,
    initial: Hotspot,
    model=TaxelModel(),
    cfg=FrontEndConfig(),
    activity_threshold=DEFAULT_ACTIVITY_THRESHOLD,
    lost_after=3,
    rng=None,
):
    """Track a located touch by re-reading only its 3x3 window per frame.

    Returns (hotspots, patches, trace); raises TouchLost carrying the
    partial results when the window reads inactive ``lost_after`` frames
    in a row.
    """
    hotspots, patches = [], []
    trace = ScanTrace()
    center = initial.center
    inactive_streak = 0
    for step, field in enumerate(fields):
        reader = _Reader(field, model, cfg, rng, trace=trace)
        window = hotspot_window(center, *field.shape)
        codes = read_window(reader, window)
        patches.append(codes)
        new_center, peak = recenter(codes, activity_threshold)
        if new_center is None:
            inactive_streak += 1
            if inactive_streak >= lost_after:
                raise TouchLost(step, hotspots, patches, trace)
            new_center = center
        else:
            inactive_streak = 0
            center = new_center
        hotspots.append(Hotspot(center, hotspot_window(center, *field.shape), peak))
    return hotspots, patches, trace


def expected_scan_counts(n: int) -> ScanStats:
    """Closed-form scan accounting for an n-taxel square power-of-two array."""
    if n < 4 or (n & (n - 1)) != 0:
        raise ValueError("taxel count must be a power of two >= 4")
    side = math.isqrt(n)
    if side * side != n:
        raise ValueError("taxel count must be a perfect square")
    log2n = int(math.log2(n))
    avg = (side + log2n) / 2.0
    worst = side + int(math.log2(side))
    return ScanStats(
        n=n,
        avg_scans=avg,
        worst_scans=worst,
        ratio_vs_frame=n / worst,
        ratio_vs_rowcol=2 * side / worst,
        dr_gain=n / 9.0,
    )
