"""Signal preprocessing (magnitude, normalization, decimation, model-input
assembly) and a synthetic walk generator with an exact step-count label.

Preprocessing order is fixed: decimate the raw three-axis signal first, then
derive the magnitude channel, then min-max normalize each channel of each
sample independently to [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SignalSample
from .tape import ShapeError

INPUT_MODES = ("l2", "xyz", "l2xyz")


@dataclass
class TimeSeries:
    fs_hz: float
    channels: np.ndarray            # (L, C) float64
    channel_names: tuple[str, ...]

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.ndim != 2 or self.channels.shape[0] < 1:
            raise ShapeError(f"channels must be (L, C) with L >= 1, got {self.channels.shape}")
        if len(self.channel_names) != self.channels.shape[1]:
            raise ShapeError(f"{len(self.channel_names)} names for "
                             f"{self.channels.shape[1]} channels")
        if self.fs_hz <= 0:
            raise ValueError("fs_hz must be positive")

    @property
    def duration_s(self) -> float:
        return self.channels.shape[0] / self.fs_hz


def l2_norm(xyz: np.ndarray) -> np.ndarray:
    """Row-wise euclidean magnitude: (L, 3) -> (L, 1)."""
    xyz = np.asarray(xyz, dtype=np.float64)
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise ShapeError(f"l2_norm expects (L, 3), got {xyz.shape}")
    return np.linalg.norm(xyz, axis=1, keepdims=True)


def minmax_normalize(series: np.ndarray) -> np.ndarray:
    """Map every channel to [0, 1] over this sample. The channel minimum maps
    to exactly 0 and the maximum to exactly 1. A constant channel becomes all
    zeros, with a warning."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[0] < 1:
        raise ShapeError(f"minmax_normalize expects (L, C), got {series.shape}")
    out = np.empty_like(series)
    lo = series.min(axis=0)
    hi = series.max(axis=0)
    for ch in range(series.shape[1]):
        if hi[ch] == lo[ch]:
            warnings.warn(f"channel {ch} is constant; normalized to zeros",
                          stacklevel=2)
            out[:, ch] = 0.0
        else:
            out[:, ch] = (series[:, ch] - lo[ch]) / (hi[ch] - lo[ch])
    return out


def downsample(series: TimeSeries, factor: int) -> TimeSeries:
    """Keep every factor-th row (no anti-alias filter); fs divides by factor."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    n = series.channels.shape[0]
    if factor > n:
        raise ValueError(f"factor {factor} exceeds signal length {n}")
    return TimeSeries(fs_hz=series.fs_hz / factor,
                      channels=series.channels[::factor].copy(),
                      channel_names=series.channel_names)


def build_input(sample: SignalSample, mode: str, downsample_factor: int = 1) -> TimeSeries:
    """Assemble the normalized model input for one sample.

    mode selects the channels: 'l2' (magnitude only), 'xyz' (three axes), or
    'l2xyz' (magnitude first, then the axes)."""
    if mode not in INPUT_MODES:
        raise ValueError(f"mode must be one of {INPUT_MODES}, got {mode!r}")
    if not isinstance(downsample_factor, (int, np.integer)) or downsample_factor < 1:
        raise ValueError(f"downsample_factor must be a positive integer, "
                         f"got {downsample_factor!r}")
    if downsample_factor > sample.raw.shape[0]:
        raise ValueError(f"downsample_factor {downsample_factor} exceeds signal "
                         f"length {sample.raw.shape[0]}")
    raw = sample.raw[::downsample_factor]
    fs = sample.fs_hz / downsample_factor
    if mode == "l2":
        channels = l2_norm(raw)
        names = ("l2",)
    elif mode == "xyz":
        channels = raw.copy()
        names = ("ax", "ay", "az")
    else:
        channels = np.hstack([l2_norm(raw), raw])
        names = ("l2", "ax", "ay", "az")
    return TimeSeries(fs_hz=fs, channels=minmax_normalize(channels), channel_names=names)


def input_size_for_mode(mode: str) -> int:
    if mode not in INPUT_MODES:
        raise ValueError(f"mode must be one of {INPUT_MODES}, got {mode!r}")
    return {"l2": 1, "xyz": 3, "l2xyz": 4}[mode]


# ---------------------------------------------------------------------------
# synthetic walks


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def synthesize_walk(seed: int, num_steps: int, fs_hz: float = 25.0,
                    cadence_hz: float = 1.8, noise_sd: float = 0.05,
                    pause_prob: float = 0.0, amp_jitter: float = 0.3,
                    interval_jitter: float = 0.2, subject: str = "s00",
                    sample_id: str | None = None) -> SignalSample:
    """Generate one walk whose label is exact by construction.

    The signal is a unit gravity vector plus one half-sine pulse per step,
    projected onto a per-walk direction, plus white noise. Timing is laid out
    in whole samples. The pulse spans an odd number of samples with the crest
    exactly in the middle, so each pulse contributes a single local maximum of
    the magnitude channel; the pulse direction keeps a positive component
    along gravity, so the magnitude bump is monotone in the pulse. With all
    jitter, pauses, and noise at zero, the walk spans exactly
    num_steps * round(fs/cadence) samples.
    """
    if not (0.5 < cadence_hz < 3.5):
        raise ValueError(f"cadence_hz must lie strictly inside (0.5, 3.5), got {cadence_hz}")
    if num_steps < 0:
        raise ValueError("num_steps must be >= 0")
    if fs_hz <= 0:
        raise ValueError("fs_hz must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    if not (0 <= pause_prob <= 1):
        raise ValueError("pause_prob must be in [0, 1]")
    if not (0 <= amp_jitter < 1) or not (0 <= interval_jitter < 1):
        raise ValueError("jitter fractions must be in [0, 1)")

    rng = np.random.default_rng(seed)
    interval = max(int(round(fs_hz / cadence_hz)), 2)
    dur = min(int(round(0.3 * fs_hz)), int(round(0.5 * interval)))
    if dur % 2 == 0:
        dur -= 1
    dur = max(dur, 1)
    lead = (interval - dur) // 2
    tail = interval - dur - lead

    gravity = _unit(rng.normal(size=3))
    direction = _unit(rng.normal(size=3))
    while float(direction @ gravity) < 0.3:
        direction = _unit(rng.normal(size=3))

    starts = []
    amps = []
    pos = lead
    for k in range(num_steps):
        if k > 0:
            gap = interval
            if interval_jitter > 0:
                gap = int(round(interval * (1.0 + interval_jitter * rng.uniform(-1.0, 1.0))))
            gap = max(gap, dur)  # pulses may touch but never overlap
            if pause_prob > 0 and rng.uniform() < pause_prob:
                gap += int(round(rng.uniform(0.5, 1.5) * fs_hz))
            pos += gap
        starts.append(pos)
        amp = 1.0
        if amp_jitter > 0:
            amp *= 1.0 + amp_jitter * rng.uniform(-1.0, 1.0)
        amps.append(amp)

    if num_steps > 0:
        total = starts[-1] + dur + tail
    else:
        total = max(int(round(1.0 * fs_hz)), 1)

    raw = np.tile(gravity, (total, 1))
    crest = np.sin(np.pi * (np.arange(dur) + 0.5) / dur)   # peak value exactly 1
    for start, amp in zip(starts, amps):
        raw[start:start + dur] += (amp * crest)[:, None] * direction[None, :]
    if noise_sd > 0:
        raw += rng.normal(0.0, noise_sd, size=raw.shape)

    if sample_id is None:
        sample_id = f"synth-{seed:08d}"
    return SignalSample(sample_id=sample_id, subject=subject, raw=raw,
                        fs_hz=fs_hz, step_count=num_steps, placement="synthetic")


def synthesize_dataset(seed: int, n: int, steps_range: tuple[int, int] = (8, 40),
                       duration_range: tuple[float, float] = (5.0, 25.0),
                       fs_hz: float = 25.0, noise_sd: float = 0.05,
                       pause_prob: float = 0.05, amp_jitter: float = 0.3,
                       interval_jitter: float = 0.2, n_subjects: int = 10,
                       name: str = "synth") -> list[SignalSample]:
    """A reproducible collection of walks. Step counts are uniform over
    steps_range; the cadence is chosen so the nominal duration lands inside
    duration_range while staying in the generator's valid band."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if steps_range[0] > steps_range[1] or steps_range[0] < 0:
        raise ValueError(f"bad steps_range {steps_range}")
    if duration_range[0] > duration_range[1] or duration_range[0] <= 0:
        raise ValueError(f"bad duration_range {duration_range}")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        steps = int(rng.integers(steps_range[0], steps_range[1] + 1))
        lo = max(duration_range[0], steps / 3.3)
        hi = min(duration_range[1], steps / 0.6) if steps > 0 else duration_range[1]
        duration = rng.uniform(lo, max(lo, hi))
        cadence = float(np.clip(steps / duration, 0.6, 3.4)) if steps > 0 else 1.8
        walk_seed = int(rng.integers(0, 2 ** 31 - 1))
        samples.append(synthesize_walk(
            seed=walk_seed, num_steps=steps, fs_hz=fs_hz, cadence_hz=cadence,
            noise_sd=noise_sd, pause_prob=pause_prob, amp_jitter=amp_jitter,
            interval_jitter=interval_jitter, subject=f"s{i % n_subjects:02d}",
            sample_id=f"{name}-{i:04d}"))
    return samples
