"""Baseline counters against generator labels and analytic signals."""

import numpy as np
import pytest

from steplab.baselines import (AUTOCORR_MIN_CONFIDENCE, AutocorrResult,
                               BaselineConfig, count_autocorrelation,
                               count_peaks, count_threshold, estimate_period)
from steplab.signals import TimeSeries, build_input, synthesize_walk


def clean_walk(seed, steps, cadence=2.5, fs=25.0):
    return synthesize_walk(seed=seed, num_steps=steps, fs_hz=fs,
                           cadence_hz=cadence, noise_sd=0.0, pause_prob=0.0,
                           amp_jitter=0.0, interval_jitter=0.0)


def norm_l2(sample):
    return build_input(sample, "l2")


def series(x, fs=25.0):
    return TimeSeries(fs_hz=fs, channels=np.asarray(x, dtype=np.float64)[:, None],
                      channel_names=("l2",))


# ---------------------------------------------------------------------------
# config


def test_config_defaults():
    cfg = BaselineConfig()
    assert cfg.smooth_window_s == 0.25
    assert cfg.peak_min_prominence_k == 0.5
    assert cfg.min_step_interval_s == 0.33
    assert cfg.cadence_band_hz == (0.6, 3.0)


@pytest.mark.parametrize("kwargs", [
    {"smooth_window_s": 0.0},
    {"peak_min_prominence_k": -1.0},
    {"min_step_interval_s": 0.0},
    {"cadence_band_hz": (3.0, 0.6)},
    {"cadence_band_hz": (0.0, 3.0)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BaselineConfig(**kwargs)


# ---------------------------------------------------------------------------
# peak counter


def test_peaks_clean_twenty_pulse_walk():
    assert count_peaks(norm_l2(clean_walk(7, 20))) == 20


def test_peaks_constant_signal_is_zero():
    assert count_peaks(series(np.ones(100))) == 0


def test_peaks_suppresses_close_pair():
    # two pulses 3 samples apart at 25 Hz sit inside the 0.33 s refractory
    x = np.zeros(60)
    x[[20, 23]] = [1.0, 0.8]
    assert count_peaks(series(x)) == 1
    far = np.zeros(60)
    far[[15, 40]] = [1.0, 0.8]
    assert count_peaks(series(far)) == 2


def test_peaks_window_longer_than_signal():
    with pytest.raises(ValueError, match="exceeds"):
        count_peaks(series(np.ones(3)))


def test_peaks_requires_univariate():
    ts = TimeSeries(fs_hz=25.0, channels=np.ones((50, 3)),
                    channel_names=("ax", "ay", "az"))
    with pytest.raises(ValueError, match="univariate"):
        count_peaks(ts)


# ---------------------------------------------------------------------------
# threshold counter


def test_threshold_clean_twenty_pulse_walk():
    assert count_threshold(norm_l2(clean_walk(11, 20))) == 20


def test_threshold_constant_signal_is_zero():
    assert count_threshold(series(np.ones(100))) == 0


def test_threshold_pure_sine_crossings():
    # one upward crossing per cycle, edges may add or drop one
    fs, f, T = 50.0, 2.0, 10.0
    t = np.arange(int(fs * T)) / fs
    x = np.sin(2 * np.pi * f * t)
    got = count_threshold(series(x, fs=fs))
    assert abs(got - f * T) <= 1


def test_threshold_window_longer_than_signal():
    with pytest.raises(ValueError, match="exceeds"):
        count_threshold(series(np.ones(3)))


# ---------------------------------------------------------------------------
# autocorrelation counter


def test_autocorr_pure_two_hz_sine():
    fs, f, T = 50.0, 2.0, 10.0
    t = np.arange(int(fs * T)) / fs
    res = count_autocorrelation(series(np.sin(2 * np.pi * f * t), fs=fs))
    assert isinstance(res, AutocorrResult)
    assert res.count == 20
    assert res.lag == 25
    assert res.period_s == pytest.approx(0.5)
    assert res.confident


def test_autocorr_prefers_fundamental_lag():
    # period 24 samples; in-band multiples 24/48/72 all correlate, the
    # energy-normalized estimator decays with lag so the smallest wins
    fs = 48.0
    t = np.arange(960) / fs
    res = count_autocorrelation(series(np.sin(2 * np.pi * 2.0 * t), fs=fs))
    assert res.lag == 24


def test_autocorr_clean_walk_regular_cadence():
    # 1.8 Hz for ~30 s: 54 steps, interval 14 samples at 25 Hz
    sample = clean_walk(3, 54, cadence=1.8)
    res = count_autocorrelation(norm_l2(sample))
    assert res.lag == 14
    assert res.count == 54
    assert res.confident


def test_autocorr_white_noise_flagged():
    rng = np.random.default_rng(0)
    res = count_autocorrelation(series(rng.normal(size=500)))
    assert not res.confident
    assert res.peak_r < AUTOCORR_MIN_CONFIDENCE


def test_autocorr_too_short():
    with pytest.raises(ValueError, match="at least"):
        count_autocorrelation(series(np.ones(20)))   # 0.8 s < 2/0.6


def test_autocorr_constant_signal():
    with pytest.raises(ValueError, match="constant"):
        count_autocorrelation(series(np.full(200, 3.0)))


def test_estimate_period_no_admissible_lag():
    with pytest.raises(ValueError, match="admissible"):
        estimate_period(np.sin(np.arange(5.0)), fs=25.0, band_hz=(0.6, 3.0))


# ---------------------------------------------------------------------------
# family exactness and invariances


def test_all_counters_exact_on_clean_family():
    rng = np.random.default_rng(42)
    for seed in rng.integers(0, 2**31 - 1, size=50):
        steps = int(rng.integers(10, 41))
        ts = norm_l2(clean_walk(int(seed), steps))
        assert count_peaks(ts) == steps
        assert count_threshold(ts) == steps
        assert count_autocorrelation(ts).count == steps


def test_shift_invariance():
    x = norm_l2(clean_walk(5, 15)).channels[:, 0]
    a, b = series(x), series(x + 7.5)
    assert count_peaks(a) == count_peaks(b)
    assert count_threshold(a) == count_threshold(b)
    assert count_autocorrelation(a).count == count_autocorrelation(b).count


def test_scale_invariance_after_normalization():
    from steplab.signals import minmax_normalize
    raw = norm_l2(clean_walk(9, 18)).channels
    rescaled = minmax_normalize(3.7 * raw - 2.1)
    a, b = series(raw[:, 0]), series(rescaled[:, 0])
    assert count_peaks(a) == count_peaks(b) == 18
    assert count_threshold(a) == count_threshold(b) == 18
    assert count_autocorrelation(a).count == count_autocorrelation(b).count == 18
