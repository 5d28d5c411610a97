"""Synthetic tactile digit dataset: generation, persistence, 4:1 split.

Every sample is rendered to pressure frames, pushed through the
event-driven acquisition pipeline (scan + tracking + delta modulation),
and kept both as an AER event stream (SNN input) and as the accumulated
ADC map (CNN input). Sample RNG derives from (seed, index), so parallel
and serial generation agree.
"""

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .acquisition import acquire_sample, DEFAULT_DELTA
from .codec import EventStream, read_aer, write_aer
from .sensor import FrontEndConfig, TaxelModel, GRID_ROWS, GRID_COLS
from .trajectories import (
    FRAMES_PER_SAMPLE,
    accumulate_pressure_map,
    gen_digit_trajectory,
    render_pressure,
)

N_CLASSES = 9
DEFAULT_PER_CLASS = 85
DEFAULT_STYLES = 13
TEST_FRACTION = 0.2


@dataclass
class Dataset:
    streams: list                 # EventStream per sample
    spikes: np.ndarray            # (n, T, 16, 16) int8 ternary
    maps: np.ndarray              # (n, 16, 16) float32, accumulated ADC maps
    labels: np.ndarray            # (n,) int, digits 1-9
    styles: np.ndarray            # (n,) int
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int = 0
    delta: int = DEFAULT_DELTA
    meta: dict = dc_field(default_factory=dict)

    def __len__(self):
        return len(self.labels)


def sample_rng_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def generate_sample(
    digit: int,
    style: int,
    rng_seed: int,
    delta: int = DEFAULT_DELTA,
    model: TaxelModel = TaxelModel(),
    cfg: FrontEndConfig = FrontEndConfig(),
    activity_threshold: int = None,
):
    """One sample through the full acquisition path.

    Returns (EventStream, accumulated ADC map in [0,1]).
    """
    traj = gen_digit_trajectory(digit, style, rng_seed)
    frames = render_pressure(traj)
    kwargs = {} if activity_threshold is None else \
        {"activity_threshold": activity_threshold}
    stream, code_frames = acquire_sample(
        frames, delta, model, cfg, label=digit,
        noise_seed=rng_seed, return_code_frames=True, **kwargs,
    )
    acc = code_frames.sum(axis=0).astype(np.float64)
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return stream, acc.astype(np.float32)


def stratified_split(labels: np.ndarray, seed: int, test_fraction: float = TEST_FRACTION):
    """Deterministic per-class 4:1 split."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5B17, int(seed)]))
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = rng.permutation(idx)
        n_test = int(round(len(idx) * test_fraction))
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train)), np.sort(np.array(test))


def build_dataset(
    per_class: int = DEFAULT_PER_CLASS,
    n_styles: int = DEFAULT_STYLES,
    seed: int = 0,
    delta: int = DEFAULT_DELTA,
    model: TaxelModel = TaxelModel(),
    cfg: FrontEndConfig = FrontEndConfig(),
    activity_threshold: int = None,
) -> Dataset:
    """Generate per_class samples of each digit across n_styles writer styles."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    streams, spikes, maps, labels, styles = [], [], [], [], []
    index = 0
    for digit in range(1, N_CLASSES + 1):
        for k in range(per_class):
            style = k % n_styles
            stream, acc = generate_sample(
                digit, style, sample_rng_seed(seed, index), delta, model, cfg,
                activity_threshold=activity_threshold,
            )
            streams.append(stream)
            spikes.append(stream.to_spike_tensor())
            maps.append(acc)
            labels.append(digit)
            styles.append(style)
            index += 1
    labels = np.array(labels)
    train_idx, test_idx = stratified_split(labels, seed)
    return Dataset(
        streams=streams,
        spikes=np.stack(spikes),
        maps=np.stack(maps),
        labels=labels,
        styles=np.array(styles),
        train_idx=train_idx,
        test_idx=test_idx,
        seed=seed,
        delta=delta,
        meta={"per_class": per_class, "n_styles": n_styles,
              "noise_sigma": cfg.noise_sigma},
    )


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write one .taer per sample, the ADC maps, and the JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = np.full(len(dataset), "train", dtype=object)
    split[dataset.test_idx] = "test"
    entries = []
    for i, stream in enumerate(dataset.streams):
        name = f"sample_{i:04d}_digit{dataset.labels[i]}.taer"
        (out / name).write_bytes(write_aer(stream))
        entries.append({
            "file": name,
            "label": int(dataset.labels[i]),
            "style": int(dataset.styles[i]),
            "split": str(split[i]),
        })
    np.savez_compressed(out / "maps.npz", maps=dataset.maps)
    manifest = {
        "seed": dataset.seed,
        "per_class": dataset.meta.get("per_class"),
        "n_styles": dataset.meta.get("n_styles"),
        "delta": dataset.delta,
        "maps_file": "maps.npz",
        "samples": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


def load_dataset(manifest_path) -> Dataset:
    """Reload a saved dataset from its manifest."""
    path = Path(manifest_path)
    manifest = json.loads(path.read_text())
    base = path.parent
    streams, spikes, labels, styles = [], [], [], []
    train_idx, test_idx = [], []
    for i, entry in enumerate(manifest["samples"]):
        stream = read_aer((base / entry["file"]).read_bytes())
        streams.append(stream)
        spikes.append(stream.to_spike_tensor())
        labels.append(entry["label"])
        styles.append(entry["style"])
        (test_idx if entry["split"] == "test" else train_idx).append(i)
    maps = np.load(base / manifest.get("maps_file", "maps.npz"))["maps"]
    return Dataset(
        streams=streams,
        spikes=np.stack(spikes),
        maps=maps,
        labels=np.array(labels),
        styles=np.array(styles),
        train_idx=np.array(train_idx),
        test_idx=np.array(test_idx),
        seed=manifest["seed"],
        delta=manifest.get("delta", DEFAULT_DELTA),
        meta={"per_class": manifest.get("per_class"), "n_styles": manifest.get("n_styles")},
    )
