"""Sample containers, the canonical on-disk dataset format, label statistics,
and conversion from simple source layouts.

Canonical format: one CSV per sample with header ``t,ax,ay,az`` (time in
seconds, strictly increasing) plus a line-delimited JSON manifest. The first
manifest line is a header record carrying the schema name and version; every
following line describes one sample. Floats are written with repr precision,
so a save/load round trip reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_SCHEMA = "steplab-manifest"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"

POPULATIONS = ("sighted", "cane", "dog", "n/a")
REGULARITIES = ("regular", "semi-regular", "n/a")


class DataError(ValueError):
    """Raised for malformed manifests, sample files, or source layouts."""


class UnsupportedLayoutError(DataError):
    """Raised when a conversion source directory does not match the
    documented layout; the message lists the expected files."""


@dataclass
class SignalSample:
    """One recorded walk: a three-axis accelerometer signal and its count."""
    sample_id: str
    subject: str
    raw: np.ndarray          # (L, 3) float64, axes ax, ay, az
    fs_hz: float
    step_count: int
    placement: str = "n/a"
    population: str = "n/a"
    regularity: str = "n/a"

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.ndim != 2 or self.raw.shape[1] != 3 or self.raw.shape[0] < 1:
            raise DataError(
                f"sample {self.sample_id}: raw signal must be (L,3) with L >= 1, "
                f"got {self.raw.shape}")
        if not np.all(np.isfinite(self.raw)):
            raise DataError(f"sample {self.sample_id}: raw signal has non-finite entries")
        if self.fs_hz <= 0:
            raise DataError(f"sample {self.sample_id}: fs_hz must be positive")
        if self.step_count < 0 or int(self.step_count) != self.step_count:
            raise DataError(f"sample {self.sample_id}: step_count must be a "
                            f"non-negative integer, got {self.step_count}")
        self.step_count = int(self.step_count)

    @property
    def duration_s(self) -> float:
        return self.raw.shape[0] / self.fs_hz


@dataclass
class LabelStats:
    n: int
    minimum: float
    maximum: float
    mean: float
    std: float      # sample standard deviation, n-1 denominator
    skew: float     # biased Fisher-Pearson m3 / m2^1.5; 0 for zero variance


def label_stats(counts) -> LabelStats:
    """Distribution summary of step-count labels."""
    a = np.asarray(counts, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise DataError("label_stats needs a non-empty 1-D sequence of counts")
    mean = a.mean()
    centered = a - mean
    m2 = (centered ** 2).mean()
    if m2 == 0.0:
        skew = 0.0
    else:
        skew = (centered ** 3).mean() / m2 ** 1.5
    std = a.std(ddof=1) if a.size > 1 else 0.0
    return LabelStats(n=int(a.size), minimum=float(a.min()), maximum=float(a.max()),
                      mean=float(mean), std=float(std), skew=float(skew))


# ---------------------------------------------------------------------------
# canonical per-sample CSV


def _write_sample_csv(path: Path, sample: SignalSample) -> None:
    t = np.arange(sample.raw.shape[0]) / sample.fs_hz
    buf = io.StringIO()
    buf.write("t,ax,ay,az\n")
    for k in range(sample.raw.shape[0]):
        row = sample.raw[k]
        # repr of a Python float round-trips the value bit for bit
        buf.write(f"{float(t[k])!r},{float(row[0])!r},"
                  f"{float(row[1])!r},{float(row[2])!r}\n")
    path.write_text(buf.getvalue())


def _read_sample_csv(path: Path, sample_id: str) -> np.ndarray:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"sample {sample_id}: cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != "t,ax,ay,az":
        raise DataError(f"sample {sample_id}: {path} missing 't,ax,ay,az' header")
    rows = []
    t_prev = -math.inf
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise DataError(f"sample {sample_id}: {path} line {lineno}: "
                            f"expected 4 columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise DataError(f"sample {sample_id}: {path} line {lineno}: "
                            f"non-numeric cell") from exc
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"sample {sample_id}: {path} line {lineno}: non-finite value")
        if vals[0] <= t_prev:
            raise DataError(f"sample {sample_id}: {path} line {lineno}: "
                            f"time column must be strictly increasing")
        t_prev = vals[0]
        rows.append(vals[1:])
    if not rows:
        raise DataError(f"sample {sample_id}: {path} has no data rows")
    return np.array(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# manifest


def _sample_record(sample: SignalSample, rel_path: str) -> dict:
    return {
        "id": sample.sample_id,
        "path": rel_path,
        "subject": sample.subject,
        "placement": sample.placement,
        "population": sample.population,
        "regularity": sample.regularity,
        "fs_hz": sample.fs_hz,
        "step_count": sample.step_count,
    }


REQUIRED_FIELDS = ("id", "path", "subject", "placement", "population",
                   "regularity", "fs_hz", "step_count")


def save_dataset(samples: list[SignalSample], out_dir, dataset_name: str = "dataset") -> Path:
    """Write canonical per-sample CSVs plus a manifest; returns the manifest path.

    Output is byte-deterministic for identical inputs: fixed key order, repr
    floats, no timestamps.
    """
    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    ids = set()
    lines = [json.dumps({"schema": MANIFEST_SCHEMA, "version": MANIFEST_VERSION,
                         "dataset": dataset_name, "n_samples": len(samples)},
                        sort_keys=True)]
    for sample in samples:
        if sample.sample_id in ids:
            raise DataError(f"duplicate sample id {sample.sample_id!r}")
        ids.add(sample.sample_id)
        rel = f"samples/{sample.sample_id}.csv"
        _write_sample_csv(out / rel, sample)
        lines.append(json.dumps(_sample_record(sample, rel), sort_keys=True))
    manifest = out / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_dataset(manifest_path) -> list[SignalSample]:
    """Load every sample listed in a manifest, validating as it goes. Errors
    carry the sample id and manifest line number."""
    manifest_path = Path(manifest_path)
    try:
        lines = manifest_path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not lines:
        raise DataError(f"manifest {manifest_path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path} line 1: invalid JSON") from exc
    if header.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"manifest {manifest_path}: unknown schema {header.get('schema')!r}")
    if header.get("version") != MANIFEST_VERSION:
        raise DataError(f"manifest {manifest_path}: unsupported version "
                        f"{header.get('version')!r} (expected {MANIFEST_VERSION})")
    base = manifest_path.parent
    samples = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"manifest line {lineno}: invalid JSON") from exc
        missing = [f for f in REQUIRED_FIELDS if f not in rec]
        if missing:
            raise DataError(f"manifest line {lineno}: missing fields {missing}")
        sid = rec["id"]
        if sid in seen:
            raise DataError(f"manifest line {lineno}: duplicate sample id {sid!r}")
        seen.add(sid)
        raw = _read_sample_csv(base / rec["path"], sid)
        try:
            samples.append(SignalSample(
                sample_id=sid, subject=rec["subject"], raw=raw,
                fs_hz=float(rec["fs_hz"]), step_count=rec["step_count"],
                placement=rec["placement"], population=rec["population"],
                regularity=rec["regularity"]))
        except DataError as exc:
            raise DataError(f"manifest line {lineno}: {exc}") from exc
    if not samples:
        raise DataError(f"manifest {manifest_path} lists no samples")
    return samples


# ---------------------------------------------------------------------------
# conversion from simple source layouts + reference statistics

# Published label statistics used as a conversion cross-check:
# (min, max, mean, std, skew) per dataset key.
REFERENCE_LABEL_STATS = {
    "wdsc": (63.0, 106.0, 78.0, 8.46, 0.56),
    "weallwalk": (2.0, 136.0, 40.71, 33.29, 0.81),
    "pedometer-regular": (857.0, 1100.0, 991.03, 54.03, -0.27),
    "pedometer-semi-regular": (548.0, 814.0, 704.03, 65.57, -0.21),
}

DATASET_FS = {"wdsc": 100.0, "weallwalk": 25.0, "pedometer": 15.0}

_LABELS_CSV = "labels.csv"
_SIGNALS_DIR = "signals"
_LABEL_COLUMNS = ("id", "subject", "placement", "population", "regularity",
                  "fs_hz", "step_count", "walk_start_s", "walk_end_s", "file")


@dataclass
class StatsCheck:
    """Outcome of comparing converted labels against the reference table."""
    key: str
    stats: LabelStats
    ok: bool
    failures: list[str] = field(default_factory=list)


def compare_reference_stats(key: str, stats: LabelStats,
                            rel_tol: float = 0.02) -> StatsCheck:
    """min/max must match exactly; mean/std/skew within rel_tol."""
    ref = REFERENCE_LABEL_STATS.get(key)
    if ref is None:
        raise DataError(f"no reference statistics for {key!r}")
    ref_min, ref_max, ref_mean, ref_std, ref_skew = ref
    failures = []
    if stats.minimum != ref_min:
        failures.append(f"min {stats.minimum} != {ref_min}")
    if stats.maximum != ref_max:
        failures.append(f"max {stats.maximum} != {ref_max}")
    for name, got, want in (("mean", stats.mean, ref_mean),
                            ("std", stats.std, ref_std),
                            ("skew", stats.skew, ref_skew)):
        if abs(got - want) > rel_tol * abs(want):
            failures.append(f"{name} {got:.4f} outside {rel_tol:.0%} of {want}")
    return StatsCheck(key=key, stats=stats, ok=not failures, failures=failures)


def _expected_layout(dataset_name: str) -> str:
    return (f"expected layout under the source directory: "
            f"{_LABELS_CSV} with columns {','.join(_LABEL_COLUMNS)} "
            f"and {_SIGNALS_DIR}/<file> CSVs with header t,ax,ay,az"
            + ("; wdsc rows must fill walk_start_s and walk_end_s"
               if dataset_name == "wdsc" else ""))


def convert_raw(dataset_name: str, source_dir, out_dir,
                strict_stats: bool = False) -> tuple[Path, list[StatsCheck]]:
    """Convert a source directory in the documented simple layout into the
    canonical format. Returns (manifest path, reference-stat checks).

    WDSC samples are cropped to [walk_start_s, walk_end_s]. Raises
    UnsupportedLayoutError when the layout does not match, and DataError when
    strict_stats is set and the labels disagree with the reference table.
    """
    if dataset_name not in DATASET_FS:
        raise DataError(f"unknown dataset {dataset_name!r}; "
                        f"expected one of {sorted(DATASET_FS)}")
    src = Path(source_dir)
    labels_path = src / _LABELS_CSV
    signals_dir = src / _SIGNALS_DIR
    if not labels_path.is_file() or not signals_dir.is_dir():
        raise UnsupportedLayoutError(
            f"unrecognized {dataset_name} layout at {src}; {_expected_layout(dataset_name)}")

    expected_fs = DATASET_FS[dataset_name]
    samples = []
    with labels_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        got_cols = tuple(reader.fieldnames or ())
        if set(_LABEL_COLUMNS) - set(got_cols):
            raise UnsupportedLayoutError(
                f"{labels_path} columns {got_cols} do not match; "
                f"{_expected_layout(dataset_name)}")
        for rownum, rec in enumerate(reader, start=2):
            sid = rec["id"]
            fs = float(rec["fs_hz"])
            if fs != expected_fs:
                raise DataError(f"{labels_path} row {rownum}: {dataset_name} samples "
                                f"must be {expected_fs} Hz, got {fs}")
            raw = _read_sample_csv(signals_dir / rec["file"], sid)
            if dataset_name == "wdsc":
                if not rec["walk_start_s"] or not rec["walk_end_s"]:
                    raise DataError(f"{labels_path} row {rownum}: wdsc requires "
                                    f"walk_start_s and walk_end_s")
                start = float(rec["walk_start_s"])
                end = float(rec["walk_end_s"])
                if not (0 <= start < end):
                    raise DataError(f"{labels_path} row {rownum}: bad walk interval "
                                    f"[{start}, {end}]")
                lo = int(round(start * fs))
                hi = min(int(round(end * fs)), raw.shape[0])
                if hi - lo < 1:
                    raise DataError(f"{labels_path} row {rownum}: walk interval "
                                    f"crops sample {sid} to nothing")
                raw = raw[lo:hi]
            if rec["population"] not in POPULATIONS:
                raise DataError(f"{labels_path} row {rownum}: population "
                                f"{rec['population']!r} not in {POPULATIONS}")
            if rec["regularity"] not in REGULARITIES:
                raise DataError(f"{labels_path} row {rownum}: regularity "
                                f"{rec['regularity']!r} not in {REGULARITIES}")
            samples.append(SignalSample(
                sample_id=sid, subject=rec["subject"], raw=raw, fs_hz=fs,
                step_count=int(rec["step_count"]), placement=rec["placement"],
                population=rec["population"], regularity=rec["regularity"]))

    if not samples:
        raise DataError(f"{labels_path} lists no samples")
    manifest = save_dataset(samples, out_dir, dataset_name=dataset_name)

    checks = []
    if dataset_name == "pedometer":
        for reg in ("regular", "semi-regular"):
            counts = [s.step_count for s in samples if s.regularity == reg]
            if counts:
                checks.append(compare_reference_stats(
                    f"pedometer-{reg}", label_stats(counts)))
    else:
        checks.append(compare_reference_stats(
            dataset_name, label_stats([s.step_count for s in samples])))
    if strict_stats:
        bad = [c for c in checks if not c.ok]
        if bad:
            raise DataError("converted labels disagree with the reference table: "
                            + "; ".join(f"{c.key}: {', '.join(c.failures)}" for c in bad))
    return manifest, checks
