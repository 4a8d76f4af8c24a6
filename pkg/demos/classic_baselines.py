"""The three classical counters, and where they break.

On clean periodic walks, peak picking, hysteresis threshold crossing, and
autocorrelation all read off the exact count. Add amplitude jitter, timing
jitter, pauses, and sensor noise, and each degrades in its own way -- the
parameter-tuning fragility that motivates learning the counter instead.

Run: python demos/classic_baselines.py [--seed N] [--n N]
"""

import argparse

import numpy as np

from steplab.baselines import (count_autocorrelation, count_peaks,
                               count_threshold)
from steplab.signals import build_input, synthesize_walk


def counts(sample):
    ts = build_input(sample, "l2")
    ac = count_autocorrelation(ts)
    flag = "" if ac.confident else " (low confidence)"
    return count_peaks(ts), count_threshold(ts), f"{ac.count}{flag}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=6, help="walks per family")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    header = f"{'true':>5} {'peaks':>6} {'thresh':>7} {'autocorr':>9}"

    print("clean family (all stochastics off):")
    print(header)
    for _ in range(args.n):
        steps = int(rng.integers(10, 41))
        s = synthesize_walk(int(rng.integers(2**31)), steps, cadence_hz=2.0,
                            noise_sd=0.0, pause_prob=0.0, amp_jitter=0.0,
                            interval_jitter=0.0)
        p, t, a = counts(s)
        print(f"{steps:5d} {p:6d} {t:7d} {a:>9}")

    print("noisy family (noise, jitter, pauses at defaults):")
    print(header)
    for _ in range(args.n):
        steps = int(rng.integers(10, 41))
        s = synthesize_walk(int(rng.integers(2**31)), steps, cadence_hz=2.0,
                            pause_prob=0.1)
        p, t, a = counts(s)
        print(f"{steps:5d} {p:6d} {t:7d} {a:>9}")


if __name__ == "__main__":
    main()
