"""Classical time-domain step counters: smoothed peak picking, hysteresis
threshold crossing, and autocorrelation period estimation.

All three operate on a univariate series (normally the pipeline's normalized
magnitude channel). They are invariant to adding a constant and, run after
min-max normalization, to positive rescaling. Each exposes the tuning knobs
that make such counters fragile; defaults come from the walking-cadence band
rather than any dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .signals import TimeSeries

# below this normalized autocorrelation the period estimate is noise
AUTOCORR_MIN_CONFIDENCE = 0.25


@dataclass(frozen=True)
class BaselineConfig:
    smooth_window_s: float = 0.25
    peak_min_prominence_k: float = 0.5
    min_step_interval_s: float = 0.33
    cadence_band_hz: tuple[float, float] = (0.6, 3.0)

    def __post_init__(self):
        if self.smooth_window_s <= 0:
            raise ValueError("smooth_window_s must be positive")
        if self.peak_min_prominence_k <= 0:
            raise ValueError("peak_min_prominence_k must be positive")
        if self.min_step_interval_s <= 0:
            raise ValueError("min_step_interval_s must be positive")
        lo, hi = self.cadence_band_hz
        if lo <= 0 or lo >= hi:
            raise ValueError(f"cadence band needs 0 < lo < hi, got {self.cadence_band_hz}")


def _univariate(series: TimeSeries) -> np.ndarray:
    if series.channels.shape[1] != 1:
        raise ValueError(f"baselines need a univariate series, "
                         f"got {series.channels.shape[1]} channels")
    return series.channels[:, 0]


def _smooth(x: np.ndarray, fs: float, window_s: float) -> np.ndarray:
    w = max(int(round(window_s * fs)), 1)
    if w % 2 == 0:
        w += 1                       # symmetric window, no phase shift
    if w > x.size:
        raise ValueError(f"smoothing window of {w} samples exceeds "
                         f"signal length {x.size}")
    padded = np.pad(x, w // 2, mode="edge")
    return np.convolve(padded, np.full(w, 1.0 / w), mode="valid")


def count_peaks(series: TimeSeries, config: BaselineConfig = BaselineConfig()) -> int:
    """Local maxima of the smoothed signal above mean + k*std, at least
    min_step_interval_s apart."""
    x = _univariate(series)
    sm = _smooth(x, series.fs_hz, config.smooth_window_s)
    height = sm.mean() + config.peak_min_prominence_k * sm.std()
    distance = max(int(round(config.min_step_interval_s * series.fs_hz)), 1)
    peaks, _ = find_peaks(sm, height=height, distance=distance)
    return int(peaks.size)


def count_threshold(series: TimeSeries, config: BaselineConfig = BaselineConfig()) -> int:
    """Upward crossings of the mean with a hysteresis band of k*std: a count
    fires on rising strictly above mean + k*std/2, and re-arms only after
    falling strictly below mean - k*std/2."""
    x = _univariate(series)
    sm = _smooth(x, series.fs_hz, config.smooth_window_s)
    half = config.peak_min_prominence_k * sm.std() / 2.0
    high = sm.mean() + half
    low = sm.mean() - half
    count = 0
    armed = False
    for v in sm:
        if armed and v > high:
            count += 1
            armed = False
        elif not armed and v < low:
            armed = True
    return count


@dataclass
class AutocorrResult:
    count: int
    lag: int                # samples
    period_s: float
    peak_r: float           # normalized autocorrelation at the chosen lag
    confident: bool


def estimate_period(x: np.ndarray, fs: float,
                    band_hz: tuple[float, float]) -> tuple[int, float]:
    """Lag in [fs/band_hi, fs/band_lo] samples maximizing the normalized
    autocorrelation of the mean-removed signal; ties within 1e-9 go to the
    smallest lag. Returns (lag, r)."""
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 == 0.0:
        raise ValueError("constant signal has no period")
    lo_hz, hi_hz = band_hz
    lag_lo = max(int(round(fs / hi_hz)), 1)
    lag_hi = min(int(round(fs / lo_hz)), x.size - 1)
    if lag_lo > lag_hi:
        raise ValueError(f"no admissible lag: band {band_hz} Hz at fs {fs} "
                         f"needs lags in [{lag_lo}, {lag_hi}]")
    lags = np.arange(lag_lo, lag_hi + 1)
    r = np.array([float(d[:-k] @ d[k:]) / c0 for k in lags])
    best = r.max()
    lag = int(lags[r >= best - 1e-9][0])
    return lag, float(r[lag - lag_lo])


def count_autocorrelation(series: TimeSeries,
                          config: BaselineConfig = BaselineConfig()) -> AutocorrResult:
    """Dominant in-band period -> count = round(duration / period). A weak
    autocorrelation peak (aperiodic input) is reported, flagged unconfident."""
    x = _univariate(series)
    lo_hz = config.cadence_band_hz[0]
    if series.duration_s < 2.0 / lo_hz:
        raise ValueError(f"need at least {2.0 / lo_hz:.3g} s of signal for the "
                         f"{config.cadence_band_hz} Hz band, got {series.duration_s:.3g} s")
    lag, r = estimate_period(x, series.fs_hz, config.cadence_band_hz)
    count = int(round(x.size / lag))
    return AutocorrResult(count=count, lag=lag, period_s=lag / series.fs_hz,
                          peak_r=r, confident=r >= AUTOCORR_MIN_CONFIDENCE)
