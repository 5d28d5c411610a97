"""Frame-by-frame acquisition: scan, track, and delta-encode.

One AcquisitionSession models the shared ADC loop at the 120 Hz frame
clock. While searching it runs the binary scan search (triggered by
activity or on the re-detection cadence); once a touch is located it
tracks the 3x3 hotspot window, reading and delta-encoding only the
visited taxels. The batch dataset generator and the live service both
drive this same class, so their event streams agree bit-exactly.
"""

from dataclasses import dataclass

import numpy as np

from .codec import DeltaEncoderState, EventStream
from .scan import DEFAULT_ACTIVITY_THRESHOLD, AmbiguousLocalizationError, hotspot_window
from .sensor import FrontEndConfig, TaxelModel, unpressed_column_code, GRID_ROWS, GRID_COLS

DEFAULT_DELTA = 6
REDETECT_EVERY = 24   # frames (0.2 s at 120 Hz)
LOST_AFTER = 3        # consecutive inactive window reads before re-search


@dataclass
class StepResult:
    frame: int
    addresses: np.ndarray   # events emitted this frame
    polarities: np.ndarray
    hotspot: tuple | None   # (row, col) of the tracked center, if tracking
    scans: int              # electrical reads performed this frame
    mode: str               # "searching" or "tracking"


class AcquisitionSession:
    """Stateful scan-track-encode loop over successive pressure fields."""

    def __init__(
        self,
        model: TaxelModel = TaxelModel(),
        cfg: FrontEndConfig = FrontEndConfig(),
        delta: int = DEFAULT_DELTA,
        activity_threshold: int = DEFAULT_ACTIVITY_THRESHOLD,
        redetect_every: int = REDETECT_EVERY,
        lost_after: int = LOST_AFTER,
        noise_seed: int = 0,
    ):
        if unpressed_column_code(GRID_ROWS, model, cfg) >= activity_threshold:
            raise AmbiguousLocalizationError(
                "activity threshold does not exceed the all-unpressed column reading"
            )
        self.model = model
        self.cfg = cfg
        self.threshold = int(activity_threshold)
        self.redetect_every = int(redetect_every)
        self.lost_after = int(lost_after)
        self.encoder = DeltaEncoderState(GRID_ROWS, GRID_COLS, delta)
        self.rng = np.random.default_rng(np.random.SeedSequence([0xAC9, int(noise_seed)]))
        self.mode = "searching"
        self.center = None
        self.lost_streak = 0
        self.frame = 0
        self.code_frame = np.zeros((GRID_ROWS, GRID_COLS), dtype=np.int64)
        self.total_scans = 0
        self.total_events = 0

    # -- electrical model, vectorized ------------------------------------

    def _taxel_voltages(self, field):
        r = np.clip(
            np.where(field > 0,
                     self.model.r_min * self.model.p_ref / np.maximum(field, 1e-300),
                     self.model.r_off),
            self.model.r_min, self.model.r_off,
        )
        v = np.clip(self.cfg.v_ref * self.cfg.r_f / r, 0.0, self.cfg.adc_full_scale)
        return r, v

    def _codes(self, volts):
        if self.cfg.noise_sigma > 0:
            volts = np.clip(volts + self.rng.normal(0.0, self.cfg.noise_sigma, volts.shape),
                            0.0, self.cfg.adc_full_scale)
        codes = np.round(volts / self.cfg.adc_full_scale * self.cfg.adc_max_code)
        return np.clip(codes, 0, self.cfg.adc_max_code).astype(np.int64)

    def _column_codes(self, r):
        r_col = 1.0 / np.sum(1.0 / r, axis=0)
        v = np.clip(self.cfg.v_ref * self.cfg.r_f / r_col, 0.0, self.cfg.adc_full_scale)
        return self._codes(v)

    def _group_code(self, r, rows, col):
        r_eq = 1.0 / np.sum(1.0 / r[rows, col])
        v = min(max(self.cfg.v_ref * self.cfg.r_f / r_eq, 0.0), self.cfg.adc_full_scale)
        return int(self._codes(np.array([v]))[0])

    # -- scan strategies ---------------------------------------------------

    def _binary_search(self, r):
        """Single-touch binary scan search; returns (taxel or None, scans)."""
        col_codes = self._column_codes(r)
        scans = 0
        for c in range(GRID_COLS):
            scans += 1
            if col_codes[c] >= self.threshold:
                rows = list(range(GRID_ROWS))
                while len(rows) > 1:
                    half = len(rows) // 2
                    scans += 1
                    if self._group_code(r, rows[:half], c) >= self.threshold:
                        rows = rows[:half]
                    else:
                        rows = rows[half:]
                return (rows[0], c), scans
        return None, scans

    # -- main loop ----------------------------------------------------------

    def step(self, field: np.ndarray) -> StepResult:
        """Process one 120 Hz frame of ground-truth pressure."""
        t = self.frame
        r, v_taxel = self._taxel_voltages(field)
        visited = np.zeros((GRID_ROWS, GRID_COLS), dtype=bool)
        scans = 0
        active_hint = bool(np.any(field > 0))

        if self.mode == "searching":
            if active_hint or t % self.redetect_every == 0:
                located, s = self._binary_search(r)
                scans += s
                if located is not None:
                    self.center = located
                    self.mode = "tracking"
                    self.lost_streak = 0
        elif t > 0 and t % self.redetect_every == 0:
            located, s = self._binary_search(r)
            scans += s
            if located is not None and located not in hotspot_window(self.center):
                self.center = located

        if self.mode == "tracking":
            # per-taxel reads of the current window only
            window = sorted(hotspot_window(self.center))
            rows_idx = np.array([w[0] for w in window])
            cols_idx = np.array([w[1] for w in window])
            v = v_taxel[rows_idx, cols_idx]
            codes = self._codes(v)
            scans += len(window)
            self.code_frame[rows_idx, cols_idx] = codes
            visited[rows_idx, cols_idx] = True
            peak = int(codes.max())
            if peak >= self.threshold:
                best = int(np.argmax(codes))  # window sorted by (row, col): ties pick smallest
                self.center = (int(rows_idx[best]), int(cols_idx[best]))
                self.lost_streak = 0
            else:
                self.lost_streak += 1
                if self.lost_streak >= self.lost_after:
                    self.mode = "searching"
                    self.center = None

        addrs, pols = self.encoder.step(self.code_frame, visited, t)
        self.frame += 1
        self.total_scans += scans
        self.total_events += len(addrs)
        return StepResult(
            frame=t, addresses=addrs, polarities=pols,
            hotspot=self.center if self.mode == "tracking" else None,
            scans=scans, mode=self.mode,
        )


def acquire_sample(
    frames: np.ndarray,
    delta: int = DEFAULT_DELTA,
    model: TaxelModel = TaxelModel(),
    cfg: FrontEndConfig = FrontEndConfig(),
    label: int = 0,
    noise_seed: int = 0,
    return_code_frames: bool = False,
    activity_threshold: int = DEFAULT_ACTIVITY_THRESHOLD,
):
    """Run a full pressure-frame sequence through acquisition.

    Returns the EventStream (and the per-frame ADC code history when
    requested, for raw-data baselines). ``activity_threshold`` must scale
    with the front-end gain: a low-gain config needs a lower detection
    threshold.
    """
    session = AcquisitionSession(model, cfg, delta,
                                 activity_threshold=activity_threshold,
                                 noise_seed=noise_seed)
    all_addr, all_ts, all_pol = [], [], []
    code_frames = np.zeros_like(frames, dtype=np.int64) if return_code_frames else None
    for t, field in enumerate(frames):
        res = session.step(field)
        if res.addresses.size:
            all_addr.append(res.addresses)
            all_ts.append(np.full(res.addresses.size, t, dtype=np.int64))
            all_pol.append(res.polarities)
        if return_code_frames:
            code_frames[t] = session.code_frame
    if all_addr:
        addresses = np.concatenate(all_addr)
        timestamps = np.concatenate(all_ts)
        polarities = np.concatenate(all_pol)
    else:
        addresses = timestamps = polarities = np.zeros(0, np.int64)
    stream = EventStream(
        rows=GRID_ROWS, cols=GRID_COLS, frame_count=len(frames), delta=delta,
        addresses=addresses, timestamps=timestamps, polarities=polarities, label=label,
    )
    if return_code_frames:
        return stream, code_frames
    return stream
