"""Count-error metrics, cross-validation folding, and report rendering.

All percentage metrics are relative to the true count, which must be positive:
error rate (signed), count accuracy (100 minus absolute error rate), and the
recognition ratio predicted/true. Under/over-count totals support two
readings: 'steps' (default) normalizes the summed signed step deficits by the
total true steps; 'samples' counts the fraction of under- or over-predicted
samples. Dispersion columns are population standard deviations over samples.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import model as model_mod
from . import train as train_mod
from .data import SignalSample
from .signals import build_input

UC_OC_MODES = ("steps", "samples")
SCHEMES = ("kfold", "loso", "l2so")


def _check_pair(pred: float, true: float) -> None:
    if true <= 0:
        raise ValueError(f"true count must be positive, got {true}")


def error_rate(pred: float, true: float) -> float:
    """Signed percentage error: negative when under-counting."""
    _check_pair(pred, true)
    return (pred - true) / true * 100.0


def rca(pred: float, true: float) -> float:
    """Ratio predicted/true; 1 is perfect."""
    _check_pair(pred, true)
    return pred / true


def acc(pred: float, true: float) -> float:
    """Count accuracy in percent: 100 minus the absolute error rate."""
    _check_pair(pred, true)
    return (1.0 - abs(pred - true) / true) * 100.0


def under_over_count(preds, trues, mode: str = "steps") -> tuple[float, float]:
    """Aggregate under- and over-count percentages.

    'steps': sum of missed steps (resp. surplus steps) over the total true
    steps, times 100. 'samples': fraction of samples predicted low (resp.
    high), times 100.
    """
    if mode not in UC_OC_MODES:
        raise ValueError(f"mode must be one of {UC_OC_MODES}, got {mode!r}")
    preds = np.asarray(preds, dtype=np.float64)
    trues = np.asarray(trues, dtype=np.float64)
    if preds.shape != trues.shape or preds.ndim != 1 or preds.size == 0:
        raise ValueError("under_over_count needs matching non-empty 1-D vectors")
    if np.any(trues <= 0):
        raise ValueError("true counts must be positive")
    if mode == "steps":
        total = trues.sum()
        uc = np.maximum(trues - preds, 0.0).sum() / total * 100.0
        oc = np.maximum(preds - trues, 0.0).sum() / total * 100.0
    else:
        n = preds.size
        uc = np.count_nonzero(preds < trues) / n * 100.0
        oc = np.count_nonzero(preds > trues) / n * 100.0
    return float(uc), float(oc)


@dataclass
class MetricsReport:
    n: int
    mae: float
    uc: float
    oc: float
    er_mean: float
    er_std: float
    rca_mean: float
    rca_std: float
    acc_mean: float
    acc_std: float
    uc_oc_mode: str = "steps"

    @property
    def acc_mean_frac(self) -> float:
        """The accuracy mean on a 0-1 scale, for tables that report it so."""
        return self.acc_mean / 100.0

    @property
    def acc_std_frac(self) -> float:
        return self.acc_std / 100.0


def compute_report(preds, trues, uc_oc_mode: str = "steps") -> MetricsReport:
    preds = np.asarray(preds, dtype=np.float64)
    trues = np.asarray(trues, dtype=np.float64)
    if preds.shape != trues.shape or preds.ndim != 1 or preds.size == 0:
        raise ValueError("compute_report needs matching non-empty 1-D vectors")
    ers = np.array([error_rate(p, t) for p, t in zip(preds, trues)])
    rcas = np.array([rca(p, t) for p, t in zip(preds, trues)])
    accs = np.array([acc(p, t) for p, t in zip(preds, trues)])
    uc, oc = under_over_count(preds, trues, uc_oc_mode)
    return MetricsReport(
        n=int(preds.size),
        mae=train_mod.mae_loss(preds, trues),
        uc=uc, oc=oc,
        er_mean=float(ers.mean()), er_std=float(ers.std()),
        rca_mean=float(rcas.mean()), rca_std=float(rcas.std()),
        acc_mean=float(accs.mean()), acc_std=float(accs.std()),
        uc_oc_mode=uc_oc_mode)


# ---------------------------------------------------------------------------
# folding


@dataclass
class Fold:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass
class FoldSpec:
    scheme: str
    folds: list[Fold]


def _ids(samples: Sequence[SignalSample]) -> list[str]:
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids")
    return ids


def make_folds(samples: Sequence[SignalSample], scheme: str, seed: int = 0,
               k: int = 5) -> FoldSpec:
    """Partition samples for cross-validation.

    kfold: seeded shuffle, then k nearly equal parts (the first n mod k folds
    take one extra sample). loso: one fold per subject, subjects sorted.
    l2so: subjects sorted, consecutive pairs per fold; an odd subject count
    leaves a final single-subject fold.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    ids = _ids(samples)
    n = len(ids)
    folds: list[Fold] = []
    if scheme == "kfold":
        if k < 2:
            raise ValueError("kfold needs k >= 2")
        if k > n:
            raise ValueError(f"k={k} exceeds sample count {n}")
        order = np.random.default_rng(seed).permutation(n)
        base = n // k
        extra = n % k
        start = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            test = sorted(ids[i] for i in order[start:start + size])
            start += size
            train = sorted(set(ids) - set(test))
            folds.append(Fold(train_ids=tuple(train), test_ids=tuple(test)))
    else:
        by_subject: dict[str, list[str]] = {}
        for s in samples:
            by_subject.setdefault(s.subject, []).append(s.sample_id)
        subjects = sorted(by_subject)
        group = 1 if scheme == "loso" else 2
        if len(subjects) < group + 1:
            raise ValueError(f"{scheme} needs at least {group + 1} subjects, "
                             f"got {len(subjects)}")
        for i in range(0, len(subjects), group):
            held = subjects[i:i + group]
            test = sorted(sid for s in held for sid in by_subject[s])
            train = sorted(set(ids) - set(test))
            folds.append(Fold(train_ids=tuple(train), test_ids=tuple(test)))
    return FoldSpec(scheme=scheme, folds=folds)


# ---------------------------------------------------------------------------
# cross-validated evaluation


@dataclass
class PredictionRecord:
    sample_id: str
    subject: str
    true: float
    pred: float
    fold: int


@dataclass
class CvResult:
    report: MetricsReport
    fold_reports: list[MetricsReport]
    predictions: list[PredictionRecord]
    folds: FoldSpec


Trainer = Callable[[list[SignalSample], int], Callable[[SignalSample], float]]


def _default_fold_run(payload) -> list[tuple[str, str, float, float]]:
    """Train on one fold and predict its test samples. Top level so process
    pools can pickle it."""
    (fold_index, train_samples, test_samples, model_config, train_config,
     input_mode, downsample_factor) = payload
    fold_seed = train_config.seed + fold_index
    params = model_mod.init_params(model_config, seed=fold_seed)
    cfg = replace(train_config, seed=fold_seed)
    train_mod.fit(model_config, params, train_samples, cfg, input_mode,
                  downsample_factor=downsample_factor)
    out = []
    for s in test_samples:
        x = build_input(s, input_mode, downsample_factor).channels
        out.append((s.sample_id, s.subject, float(s.step_count),
                    model_mod.predict(params, model_config, x)))
    return out


def evaluate_cv(samples: Sequence[SignalSample], scheme: str,
                model_config: Optional[model_mod.ModelConfig] = None,
                train_config: Optional[train_mod.TrainConfig] = None,
                input_mode: str = "l2", downsample_factor: int = 1, k: int = 5,
                uc_oc_mode: str = "steps", round_predictions: bool = False,
                trainer: Optional[Trainer] = None, jobs: int = 1) -> CvResult:
    """Cross-validate: fresh parameters per fold, pooled per-sample metrics.

    The per-fold seed is train_config.seed + fold index. A custom trainer
    (train_samples, fold_seed) -> predict(sample) replaces the model path,
    and forces sequential execution. jobs > 1 spreads default-trainer folds
    over processes; results are order-stable either way.
    """
    spec = make_folds(samples, scheme, seed=(train_config.seed if train_config else 0), k=k)
    if len(spec.folds) < 2:
        raise ValueError(f"{scheme} produced {len(spec.folds)} fold(s); need >= 2")
    by_id = {s.sample_id: s for s in samples}

    rows: list[tuple[int, str, str, float, float]] = []
    if trainer is not None:
        base_seed = train_config.seed if train_config else 0
        for fi, fold in enumerate(spec.folds):
            predict_fn = trainer([by_id[i] for i in fold.train_ids], base_seed + fi)
            for sid in fold.test_ids:
                s = by_id[sid]
                rows.append((fi, sid, s.subject, float(s.step_count),
                             float(predict_fn(s))))
    else:
        if model_config is None or train_config is None:
            raise ValueError("evaluate_cv needs model_config and train_config "
                             "unless a trainer is injected")
        payloads = [(fi, [by_id[i] for i in fold.train_ids],
                     [by_id[i] for i in fold.test_ids], model_config,
                     train_config, input_mode, downsample_factor)
                    for fi, fold in enumerate(spec.folds)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                fold_outputs = list(pool.map(_default_fold_run, payloads))
        else:
            fold_outputs = [_default_fold_run(p) for p in payloads]
        for fi, out in enumerate(fold_outputs):
            rows.extend((fi, sid, subj, true, pred) for sid, subj, true, pred in out)

    predictions = []
    for fi, sid, subj, true, pred in rows:
        if round_predictions:
            pred = float(np.rint(pred))
        predictions.append(PredictionRecord(sample_id=sid, subject=subj,
                                            true=true, pred=pred, fold=fi))
    pooled_pred = [p.pred for p in predictions]
    pooled_true = [p.true for p in predictions]
    report = compute_report(pooled_pred, pooled_true, uc_oc_mode)
    fold_reports = []
    for fi in range(len(spec.folds)):
        fp = [p.pred for p in predictions if p.fold == fi]
        ft = [p.true for p in predictions if p.fold == fi]
        fold_reports.append(compute_report(fp, ft, uc_oc_mode))
    return CvResult(report=report, fold_reports=fold_reports,
                    predictions=predictions, folds=spec)


# ---------------------------------------------------------------------------
# rendering


def render_report_text(report: MetricsReport, label: str = "overall") -> str:
    lines = [
        f"label {label}",
        f"n_samples {report.n}",
        f"mae {report.mae:.6g}",
        f"uc {report.uc:.6g}",
        f"oc {report.oc:.6g}",
        f"uc_oc_mode {report.uc_oc_mode}",
        f"er_mean {report.er_mean:.6g}",
        f"er_std {report.er_std:.6g}",
        f"rca_mean {report.rca_mean:.6g}",
        f"rca_std {report.rca_std:.6g}",
        f"acc_mean {report.acc_mean:.6g}",
        f"acc_std {report.acc_std:.6g}",
        f"acc_mean_frac {report.acc_mean_frac:.6g}",
        f"acc_std_frac {report.acc_std_frac:.6g}",
    ]
    return "\n".join(lines) + "\n"

REPORT_CSV_HEADER = ("label,n,mae,uc,oc,er_mean,er_std,rca_mean,rca_std,"
                     "acc_mean,acc_std,acc_mean_frac,acc_std_frac")


def render_report_csv(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    buf = io.StringIO()
    buf.write(REPORT_CSV_HEADER + "\n")
    for label, r in rows:
        buf.write(f"{label},{r.n},{r.mae!r},{r.uc!r},{r.oc!r},"
                  f"{r.er_mean!r},{r.er_std!r},{r.rca_mean!r},{r.rca_std!r},"
                  f"{r.acc_mean!r},{r.acc_std!r},{r.acc_mean_frac!r},{r.acc_std_frac!r}\n")
    return buf.getvalue()


def render_predictions_csv(predictions: Sequence[PredictionRecord]) -> str:
    buf = io.StringIO()
    buf.write("id,subject,fold,true,pred\n")
    for p in predictions:
        buf.write(f"{p.sample_id},{p.subject},{p.fold},{p.true!r},{p.pred!r}\n")
    return buf.getvalue()
