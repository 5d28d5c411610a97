"""Synthetic handwritten-digit stroke trajectories and pressure rendering.

Each digit has a fixed polyline template on the unit square (y grows
downward, matching grid rows). A writing style applies a small affine warp
(scale, rotation, translation); each sample adds timing and pressure
jitter. Rendering deposits a Gaussian contact footprint at the pen position
for every frame of the contact interval.
"""

import math
from typing import NamedTuple

import numpy as np

from .sensor import GRID_ROWS, GRID_COLS

FRAME_RATE = 120.0   # Hz
SAMPLE_SECONDS = 2.0
FRAMES_PER_SAMPLE = int(FRAME_RATE * SAMPLE_SECONDS)  # 240

FOOTPRINT_SIGMA = 0.6  # taxel pitches
PEAK_PRESSURE_RANGE = (100.0, 500.0)  # kPa

# Templates: list of strokes, each a polyline of (x, y) in the unit square.
DIGIT_TEMPLATES = {
    1: [[(0.50, 0.15), (0.50, 0.85)]],
    2: [[(0.28, 0.30), (0.38, 0.17), (0.62, 0.15), (0.72, 0.30), (0.64, 0.46),
         (0.30, 0.84), (0.74, 0.84)]],
    3: [[(0.30, 0.20), (0.60, 0.15), (0.72, 0.30), (0.54, 0.46), (0.72, 0.62),
         (0.60, 0.82), (0.30, 0.79)]],
    4: [[(0.64, 0.15), (0.30, 0.58), (0.76, 0.58)],
        [(0.62, 0.38), (0.62, 0.88)]],
    5: [[(0.72, 0.15), (0.35, 0.15),            # top bar
         (0.33, 0.48),                          # left vertical
         (0.58, 0.44), (0.72, 0.60), (0.62, 0.82), (0.35, 0.80)]],  # bowl
    6: [[(0.66, 0.17), (0.45, 0.30), (0.33, 0.55), (0.37, 0.78), (0.58, 0.84),
         (0.70, 0.68), (0.58, 0.55), (0.38, 0.62)]],
    7: [[(0.28, 0.18), (0.72, 0.16), (0.44, 0.85)]],
    8: [[(0.50, 0.15), (0.67, 0.26), (0.58, 0.42), (0.40, 0.56), (0.31, 0.72),
         (0.50, 0.85), (0.69, 0.72), (0.60, 0.56), (0.42, 0.42), (0.33, 0.26),
         (0.50, 0.15)]],
    9: [[(0.68, 0.33), (0.55, 0.19), (0.36, 0.28), (0.36, 0.46), (0.56, 0.50),
         (0.68, 0.33), (0.66, 0.60), (0.54, 0.85)]],
}


class StrokePoint(NamedTuple):
    time: float      # seconds from sample start
    x: float         # unit-square coordinates after warping
    y: float
    pressure: float  # kPa


def _polyline_arclengths(points):
    pts = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return pts, cum


def _interp_polyline(pts, cum, fractions):
    """Positions at the given arc-length fractions of a polyline."""
    total = cum[-1] if cum[-1] > 0 else 1.0
    s = np.asarray(fractions) * total
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    seg_len = np.maximum(cum[idx + 1] - cum[idx], 1e-12)
    w = ((s - cum[idx]) / seg_len)[:, None]
    return pts[idx] * (1 - w) + pts[idx + 1] * w


def _style_affine(style_seed: int):
    """Affine warp for one writer style: +-10% scale, +-5 deg, +-1 taxel shift."""
    rng = np.random.default_rng(np.random.SeedSequence([0x57FE, int(style_seed)]))
    sx, sy = rng.uniform(0.9, 1.1, size=2)
    theta = math.radians(rng.uniform(-5.0, 5.0))
    tx, ty = rng.uniform(-1.0 / GRID_COLS, 1.0 / GRID_COLS, size=2)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    mat = np.array([[sx * cos_t, -sy * sin_t], [sx * sin_t, sy * cos_t]])
    return mat, np.array([tx, ty])


def _pressure_envelope(n_frames, peak, rng):
    """Press-hold-release profile: raised-cosine ramps around a hold."""
    ramp = max(3, int(0.1 * FRAME_RATE * rng.uniform(0.8, 1.2)))
    ramp = min(ramp, max(1, n_frames // 2))
    env = np.ones(n_frames)
    up = 0.5 * (1 - np.cos(np.pi * np.arange(1, ramp + 1) / ramp))
    env[:ramp] = up
    env[n_frames - ramp:] = up[::-1]
    return peak * env


def gen_digit_trajectory(digit: int, style_seed: int = 0, rng_seed: int = 0):
    """Stroke points for one synthetic sample of a digit.

    Returns a list of StrokePoint at the 120 Hz frame clock, covering only
    the contact interval(s); pen-up gaps between strokes carry no points.
    Deterministic in (digit, style_seed, rng_seed).
    """
    if digit not in DIGIT_TEMPLATES:
        raise ValueError(f"digit must be in 1..9, got {digit}")
    rng = np.random.default_rng(np.random.SeedSequence([0x7A11, int(style_seed), int(digit), int(rng_seed)]))
    mat, shift = _style_affine(style_seed)

    strokes = DIGIT_TEMPLATES[digit]
    start_t = rng.uniform(0.15, 0.35)
    write_time = rng.uniform(0.7, 1.0)
    gap = rng.uniform(0.06, 0.12)
    lengths = []
    warped = []
    for stroke in strokes:
        pts = np.asarray(stroke) - 0.5
        pts = pts @ mat.T + 0.5 + shift
        pts += rng.normal(0.0, 0.004, size=pts.shape)  # per-sample wobble
        pts, cum = _polyline_arclengths(pts)
        warped.append((pts, cum))
        lengths.append(max(cum[-1], 1e-6))
    total_len = sum(lengths)
    peak = rng.uniform(*PEAK_PRESSURE_RANGE)

    points = []
    t = start_t
    for (pts, cum), length in zip(warped, lengths):
        duration = write_time * length / total_len
        n_frames = max(4, int(round(duration * FRAME_RATE)))
        # Temporal jitter: ease-in/ease-out pacing along the stroke.
        frac = np.linspace(0.0, 1.0, n_frames)
        ease = rng.uniform(0.1, 0.3)
        frac = (1 - ease) * frac + ease * (0.5 - 0.5 * np.cos(np.pi * frac))
        pos = _interp_polyline(pts, cum, frac)
        env = _pressure_envelope(n_frames, peak, rng)
        frame0 = int(round(t * FRAME_RATE))
        for i in range(n_frames):
            ft = (frame0 + i) / FRAME_RATE
            if ft >= SAMPLE_SECONDS:
                break
            points.append(StrokePoint(ft, float(pos[i, 0]), float(pos[i, 1]), float(env[i])))
        t += duration + gap
    return points


def render_pressure(trajectory, n_frames: int = FRAMES_PER_SAMPLE,
                    sigma: float = FOOTPRINT_SIGMA) -> np.ndarray:
    """Rasterize stroke points into (n_frames, 16, 16) pressure frames (kPa).

    Deposits a 2-D Gaussian footprint of the instantaneous pressure at the
    pen position; frames without contact stay zero. Overlapping deposits in
    one frame take the pointwise maximum.
    """
    frames = np.zeros((n_frames, GRID_ROWS, GRID_COLS), dtype=np.float64)
    if not trajectory:
        return frames
    rr, cc = np.meshgrid(np.arange(GRID_ROWS), np.arange(GRID_COLS), indexing="ij")
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    for pt in trajectory:
        f = int(round(pt.time * FRAME_RATE))
        if not 0 <= f < n_frames or pt.pressure <= 0:
            continue
        col = pt.x * (GRID_COLS - 1)
        row = pt.y * (GRID_ROWS - 1)
        d2 = (rr - row) ** 2 + (cc - col) ** 2
        blob = pt.pressure * np.exp(-d2 * inv2s2)
        blob[blob < 1e-3] = 0.0
        np.maximum(frames[f], blob, out=frames[f])
    return frames


def accumulate_pressure_map(frames: np.ndarray) -> np.ndarray:
    """Per-taxel sum over time, max-normalized to [0, 1]."""
    acc = np.asarray(frames, dtype=np.float64).sum(axis=0)
    peak = acc.max()
    if peak > 0:
        acc = acc / peak
    return acc
