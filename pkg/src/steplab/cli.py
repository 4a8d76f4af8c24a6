"""Command-line driver: dataset synthesis and conversion, label statistics,
training, evaluation, cross-validation, classical baselines, and attention
export.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All randomness flows
from --seed; with --jobs 1 every command is output-deterministic. Commands
that write multiple files remove them again if a later step fails.
"""

from __future__ import annotations

import argparse
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import (BaselineConfig, count_autocorrelation, count_peaks,
                        count_threshold)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import label_stats, load_dataset, save_dataset, convert_raw
from .evaluation import (compute_report, evaluate_cv, render_predictions_csv,
                         render_report_csv, render_report_text)
from .model import ModelConfig, init_params, model_forward, predict
from .signals import build_input, input_size_for_mode, synthesize_dataset
from .train import TrainConfig, fit

SCHEME_NAMES = {"kfold5": ("kfold", 5), "loso": ("loso", None),
                "l2so": ("l2so", None)}


class _Outputs:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self):
        self.paths: list[Path] = []

    def write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.paths.append(path)
        return path

    def discard(self):
        for p in self.paths:
            p.unlink(missing_ok=True)


def _fresh_dataset_dir(out_dir) -> Path:
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        raise ValueError(f"output directory {out} exists and is not empty")
    return out


def _model_config(args) -> ModelConfig:
    return ModelConfig(input_size=input_size_for_mode(args.input),
                       hidden_size=args.hidden, num_layers=args.layers,
                       use_attention=args.attention)


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch, lr0=args.lr,
                       seed=args.seed)


def _stats_text(label: str, counts) -> str:
    st = label_stats(counts)
    return (f"group {label}\nn {st.n}\nmin {st.minimum:g}\nmax {st.maximum:g}\n"
            f"mean {st.mean:.6g}\nstd {st.std:.6g}\nskew {st.skew:.6g}\n")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    out = _fresh_dataset_dir(args.out)
    samples = synthesize_dataset(
        seed=args.seed, n=args.n, steps_range=(args.steps_min, args.steps_max),
        fs_hz=args.fs, noise_sd=args.noise_sd, pause_prob=args.pause_prob,
        amp_jitter=args.amp_jitter, interval_jitter=args.interval_jitter,
        n_subjects=args.subjects, name=args.name)
    created = not out.exists()
    try:
        manifest = save_dataset(samples, out, dataset_name=args.name)
    except Exception:
        if created and out.exists():
            shutil.rmtree(out)
        raise
    print(manifest)
    print(_stats_text("all", [s.step_count for s in samples]), end="")
    return 0


def cmd_stats(args) -> int:
    samples = load_dataset(args.manifest)
    print(_stats_text("all", [s.step_count for s in samples]), end="")
    if args.by:
        groups: dict[str, list[int]] = {}
        for s in samples:
            groups.setdefault(getattr(s, args.by), []).append(s.step_count)
        for key in sorted(groups):
            print(_stats_text(f"{args.by}={key}", groups[key]), end="")
    return 0


def cmd_convert(args) -> int:
    out = _fresh_dataset_dir(args.out)
    created = not out.exists()
    try:
        manifest, checks = convert_raw(args.name, args.src, out,
                                       strict_stats=args.strict_stats)
    except Exception:
        if created and out.exists():
            shutil.rmtree(out)
        raise
    print(manifest)
    for check in checks:
        if check.ok:
            print(f"stats {check.key}: ok (n={check.stats.n})")
        else:
            print(f"stats {check.key}: MISMATCH {'; '.join(check.failures)}")
    return 0


def _split_validation(samples, val_frac: float, seed: int):
    if val_frac <= 0:
        return samples, None
    n_val = max(1, int(round(len(samples) * val_frac)))
    if n_val >= len(samples):
        raise ValueError(f"--val-frac {val_frac} leaves no training samples")
    order = np.random.default_rng(seed).permutation(len(samples))
    val = [samples[i] for i in order[:n_val]]
    train = [samples[i] for i in order[n_val:]]
    return train, val


def cmd_train(args) -> int:
    samples = load_dataset(args.dataset)
    train_samples, val_samples = _split_validation(samples, args.val_frac,
                                                   args.seed)
    mc = _model_config(args)
    tc = _train_config(args)
    params = init_params(mc, seed=args.seed)
    t0 = time.perf_counter()
    history = fit(mc, params, train_samples, tc, args.input,
                  downsample_factor=args.downsample, val_samples=val_samples)
    wall = time.perf_counter() - t0
    outputs = _Outputs()
    try:
        path = save_checkpoint(args.out, params, mc, tc, input_mode=args.input,
                               downsample_factor=args.downsample,
                               epoch=tc.epochs)
        outputs.paths.append(path)
        if args.history:
            lines = ["epoch,loss,lr" + (",val_mae" if history.val_mae else "")]
            for e, (loss, lr) in enumerate(zip(history.epoch_loss, history.lr)):
                row = f"{e},{loss!r},{lr!r}"
                if history.val_mae:
                    row += f",{history.val_mae[e]!r}"
                lines.append(row)
            outputs.write_text(Path(args.history), "\n".join(lines) + "\n")
    except Exception:
        outputs.discard()
        raise
    print(f"checkpoint {path}")
    print(f"train_loss_final {history.epoch_loss[-1]:.6g}")
    if history.val_mae:
        print(f"val_mae_final {history.val_mae[-1]:.6g}")
    print(f"wall_time_s {wall:.1f}")
    return 0


def _predict_dataset(ck, samples):
    preds = []
    for s in samples:
        x = build_input(s, ck.input_mode, ck.downsample_factor).channels
        preds.append(predict(ck.params, ck.model_config, x))
    return preds


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.dataset)
    preds = _predict_dataset(ck, samples)
    trues = [float(s.step_count) for s in samples]
    report = compute_report(preds, trues, uc_oc_mode=args.uc_oc_mode)
    text = render_report_text(report, label="eval")
    print(text, end="")
    if args.out:
        outputs = _Outputs()
        try:
            out = Path(args.out)
            outputs.write_text(out / "report.txt", text)
            outputs.write_text(out / "report.csv",
                               render_report_csv([("eval", report)]))
            pred_rows = "id,subject,true,pred\n" + "".join(
                f"{s.sample_id},{s.subject},{t!r},{p!r}\n"
                for s, t, p in zip(samples, trues, preds))
            outputs.write_text(out / "predictions.csv", pred_rows)
        except Exception:
            outputs.discard()
            raise
    return 0


def cmd_crossval(args) -> int:
    samples = load_dataset(args.dataset)
    scheme, k = SCHEME_NAMES[args.scheme]
    mc = _model_config(args)
    tc = _train_config(args)
    t0 = time.perf_counter()
    result = evaluate_cv(samples, scheme, mc, tc, input_mode=args.input,
                         downsample_factor=args.downsample, k=k or 5,
                         uc_oc_mode=args.uc_oc_mode,
                         round_predictions=args.round, jobs=args.jobs)
    wall = time.perf_counter() - t0
    header = (f"dataset {args.dataset}\nscheme {args.scheme}\n"
              f"input {args.input}\nhidden {args.hidden}\nlayers {args.layers}\n"
              f"attention {str(args.attention).lower()}\n"
              f"folds {len(result.folds.folds)}\nwall_time_s {wall:.1f}\n")
    text = header + render_report_text(result.report, label="pooled")
    print(text, end="")
    outputs = _Outputs()
    try:
        out = Path(args.out)
        outputs.write_text(out / "report.txt", text)
        rows = [("pooled", result.report)]
        rows += [(f"fold{i}", r) for i, r in enumerate(result.fold_reports)]
        outputs.write_text(out / "report.csv", render_report_csv(rows))
        outputs.write_text(out / "predictions.csv",
                           render_predictions_csv(result.predictions))
    except Exception:
        outputs.discard()
        raise
    return 0


def cmd_baseline(args) -> int:
    samples = load_dataset(args.dataset)
    cfg = BaselineConfig(smooth_window_s=args.smooth_window,
                         peak_min_prominence_k=args.k,
                         min_step_interval_s=args.min_interval,
                         cadence_band_hz=(args.band_lo, args.band_hi))
    methods = ("peaks", "threshold", "autocorr") if args.method == "all" \
        else (args.method,)
    counts: dict[str, list[float]] = {m: [] for m in methods}
    flags: list[str] = []
    for s in samples:
        ts = build_input(s, "l2", args.downsample)
        if "peaks" in counts:
            counts["peaks"].append(float(count_peaks(ts, cfg)))
        if "threshold" in counts:
            counts["threshold"].append(float(count_threshold(ts, cfg)))
        if "autocorr" in counts:
            res = count_autocorrelation(ts, cfg)
            counts["autocorr"].append(float(res.count))
            if not res.confident:
                flags.append(s.sample_id)
    trues = [float(s.step_count) for s in samples]
    blocks = ""
    for m in methods:
        blocks += render_report_text(compute_report(counts[m], trues,
                                                    uc_oc_mode=args.uc_oc_mode),
                                     label=m)
    print(blocks, end="")
    if flags:
        print(f"low_confidence_autocorr {len(flags)} sample(s): "
              + ",".join(flags[:10]) + ("..." if len(flags) > 10 else ""))
    if args.out:
        header = "id,subject,true," + ",".join(methods)
        lines = [header]
        for i, s in enumerate(samples):
            row = f"{s.sample_id},{s.subject},{trues[i]!r}"
            for m in methods:
                row += f",{counts[m][i]:g}"
            lines.append(row)
        _Outputs().write_text(Path(args.out), "\n".join(lines) + "\n")
    return 0


def cmd_export_attention(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    if not ck.model_config.use_attention:
        raise ValueError("checkpoint was trained without attention; "
                         "there are no weights to export")
    samples = load_dataset(args.dataset)
    by_id = {s.sample_id: s for s in samples}
    if args.sample not in by_id:
        raise ValueError(f"sample id {args.sample!r} not found in {args.dataset}")
    sample = by_id[args.sample]
    ts = build_input(sample, ck.input_mode, ck.downsample_factor)
    y, diag = model_forward(ck.params, ck.model_config, ts.channels,
                            want_diagnostics=True)
    lines = ["t," + ",".join(ts.channel_names) + ",score,weight"]
    for i in range(ts.channels.shape[0]):
        t = i / ts.fs_hz
        chans = ",".join(repr(float(v)) for v in ts.channels[i])
        lines.append(f"{t!r},{chans},{float(diag.scores[i])!r},"
                     f"{float(diag.weights[i])!r}")
    _Outputs().write_text(Path(args.out), "\n".join(lines) + "\n")
    print(f"sample {sample.sample_id}")
    print(f"true {sample.step_count}")
    print(f"pred {y:.6g}")
    print(f"rows {ts.channels.shape[0]}")
    print(f"weight_sum {float(diag.weights.sum())!r}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--input", choices=("l2", "xyz", "l2xyz"), default="l2")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--attention", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--downsample", type=int, default=1,
                   help="keep every Nth sample before building model input")


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steplab",
        description="Signal-level step counting: attention LSTM regression "
                    "plus classical baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic walk dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="synth")
    p.add_argument("--fs", type=float, default=25.0)
    p.add_argument("--steps-min", type=int, default=8)
    p.add_argument("--steps-max", type=int, default=40)
    p.add_argument("--noise-sd", type=float, default=0.05)
    p.add_argument("--pause-prob", type=float, default=0.05)
    p.add_argument("--amp-jitter", type=float, default=0.3)
    p.add_argument("--interval-jitter", type=float, default=0.2)
    p.add_argument("--subjects", type=int, default=10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="label statistics for a dataset manifest")
    p.add_argument("manifest")
    p.add_argument("--by", choices=("subject", "placement", "population",
                                    "regularity"))
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("convert", help="convert a raw dataset layout to the "
                                       "canonical format")
    p.add_argument("--name", required=True,
                   choices=("wdsc", "weallwalk", "pedometer"))
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict-stats", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train one model on a dataset")
    p.add_argument("--dataset", required=True)
    _add_model_flags(p)
    _add_train_flags(p)
    p.add_argument("--val-frac", type=float, default=0.0)
    p.add_argument("--history", help="write per-epoch loss CSV here")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--uc-oc-mode", choices=("steps", "samples"),
                   default="steps")
    p.add_argument("--out", help="directory for report + prediction files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crossval", help="cross-validated training/evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scheme", choices=sorted(SCHEME_NAMES), default="kfold5")
    _add_model_flags(p)
    _add_train_flags(p)
    p.add_argument("--uc-oc-mode", choices=("steps", "samples"),
                   default="steps")
    p.add_argument("--round", action="store_true",
                   help="round predictions to whole steps before metrics")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("baseline", help="classical counters on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=("peaks", "threshold", "autocorr",
                                        "all"), default="all")
    p.add_argument("--smooth-window", type=float, default=0.25)
    p.add_argument("--k", type=float, default=0.5)
    p.add_argument("--min-interval", type=float, default=0.33)
    p.add_argument("--band-lo", type=float, default=0.6)
    p.add_argument("--band-hi", type=float, default=3.0)
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--uc-oc-mode", choices=("steps", "samples"),
                   default="steps")
    p.add_argument("--out", help="per-sample counts CSV")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("export-attention",
                       help="per-timestep attention scores and weights as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample", required=True, help="sample id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_attention)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
