"""Metric oracles, fold invariants, and the cross-validation harness."""

import numpy as np
import pytest

from steplab.data import SignalSample
from steplab.evaluation import (CvResult, MetricsReport, acc, compute_report,
                                error_rate, evaluate_cv, make_folds, rca,
                                render_predictions_csv, render_report_csv,
                                render_report_text, under_over_count)


def make_sample(sample_id, subject, steps=10, length=30):
    rng = np.random.default_rng(hash(sample_id) % (2**32))
    raw = rng.normal(0.0, 1.0, size=(length, 3))
    return SignalSample(sample_id=sample_id, subject=subject, raw=raw,
                        fs_hz=25.0, step_count=steps)


# ---------------------------------------------------------------------------
# per-pair metrics


def test_error_rate_hand_value():
    # (80 - 78) / 78 * 100
    assert error_rate(80.0, 78.0) == pytest.approx(2.5641025641025643, abs=1e-15)


def test_error_rate_sign_convention():
    assert error_rate(9.0, 10.0) == pytest.approx(-10.0, abs=1e-12)
    assert error_rate(11.0, 10.0) == pytest.approx(10.0, abs=1e-12)


def test_rca_hand_value():
    assert rca(80.0, 78.0) == pytest.approx(80.0 / 78.0, abs=1e-15)


def test_acc_hand_value():
    assert acc(80.0, 78.0) == pytest.approx(100.0 - 200.0 / 78.0, abs=1e-12)


def test_perfect_prediction_fixed_points():
    assert error_rate(42.0, 42.0) == 0.0
    assert rca(42.0, 42.0) == 1.0
    assert acc(42.0, 42.0) == 100.0


@pytest.mark.parametrize("fn", [error_rate, rca, acc])
def test_nonpositive_true_rejected(fn):
    with pytest.raises(ValueError, match="positive"):
        fn(5.0, 0.0)
    with pytest.raises(ValueError, match="positive"):
        fn(5.0, -3.0)


def test_metric_identities_random():
    # rca = 1 + er/100 and acc = 100 - |er| hold pairwise.
    rng = np.random.default_rng(7)
    for _ in range(200):
        true = float(rng.uniform(1.0, 1200.0))
        pred = float(rng.uniform(0.0, 1500.0))
        er = error_rate(pred, true)
        assert rca(pred, true) == pytest.approx(1.0 + er / 100.0, abs=1e-12)
        assert acc(pred, true) == pytest.approx(100.0 - abs(er), abs=1e-12)


# ---------------------------------------------------------------------------
# aggregate under/over-count


def test_uc_oc_steps_hand_value():
    # misses 1 of 20 total, surplus 2 of 20 total
    uc, oc = under_over_count([9.0, 12.0], [10.0, 10.0], mode="steps")
    assert uc == pytest.approx(5.0, abs=1e-15)
    assert oc == pytest.approx(10.0, abs=1e-15)


def test_uc_oc_samples_hand_value():
    uc, oc = under_over_count([9.0, 12.0, 10.0, 10.0], [10.0] * 4, mode="samples")
    assert uc == pytest.approx(25.0, abs=1e-15)
    assert oc == pytest.approx(25.0, abs=1e-15)


def test_uc_oc_steps_sums_to_scaled_total_absolute_error():
    # uc + oc = 100 * sum|p - t| / sum t by construction.
    rng = np.random.default_rng(11)
    trues = rng.uniform(5.0, 100.0, size=64)
    preds = trues + rng.normal(0.0, 8.0, size=64)
    uc, oc = under_over_count(preds, trues, mode="steps")
    expect = 100.0 * np.abs(preds - trues).sum() / trues.sum()
    assert uc + oc == pytest.approx(expect, abs=1e-10)


def test_uc_oc_perfect_is_zero():
    assert under_over_count([5.0, 7.0], [5.0, 7.0], "steps") == (0.0, 0.0)
    assert under_over_count([5.0, 7.0], [5.0, 7.0], "samples") == (0.0, 0.0)


def test_uc_oc_rejects_bad_mode_and_shapes():
    with pytest.raises(ValueError, match="mode"):
        under_over_count([1.0], [1.0], mode="percent")
    with pytest.raises(ValueError, match="1-D"):
        under_over_count([1.0, 2.0], [1.0], mode="steps")
    with pytest.raises(ValueError, match="positive"):
        under_over_count([1.0], [0.0], mode="steps")


# ---------------------------------------------------------------------------
# pooled report


def test_compute_report_matches_scalar_loop():
    rng = np.random.default_rng(3)
    trues = rng.uniform(5.0, 400.0, size=100)
    preds = trues * rng.uniform(0.7, 1.3, size=100)
    rep = compute_report(preds, trues)
    ers = [error_rate(p, t) for p, t in zip(preds, trues)]
    rcas = [rca(p, t) for p, t in zip(preds, trues)]
    accs = [acc(p, t) for p, t in zip(preds, trues)]
    assert rep.n == 100
    assert rep.mae == pytest.approx(np.mean(np.abs(preds - trues)), abs=1e-12)
    assert rep.er_mean == pytest.approx(np.mean(ers), abs=1e-12)
    assert rep.er_std == pytest.approx(np.std(ers), abs=1e-12)
    assert rep.rca_mean == pytest.approx(np.mean(rcas), abs=1e-12)
    assert rep.rca_std == pytest.approx(np.std(rcas), abs=1e-12)
    assert rep.acc_mean == pytest.approx(np.mean(accs), abs=1e-12)
    assert rep.acc_std == pytest.approx(np.std(accs), abs=1e-12)
    assert rep.acc_mean_frac == pytest.approx(rep.acc_mean / 100.0, abs=1e-15)


def test_compute_report_uc_oc_mode_passthrough():
    rep = compute_report([9.0, 12.0], [10.0, 10.0], uc_oc_mode="samples")
    assert rep.uc_oc_mode == "samples"
    assert rep.uc == pytest.approx(50.0)
    assert rep.oc == pytest.approx(50.0)


def test_compute_report_rejects_empty():
    with pytest.raises(ValueError, match="non-empty"):
        compute_report([], [])


# ---------------------------------------------------------------------------
# folds


def make_pool(n, n_subjects):
    return [make_sample(f"s-{i:04d}", f"subj{i % n_subjects:02d}") for i in range(n)]


def test_kfold_sizes_117():
    samples = make_pool(117, 9)
    spec = make_folds(samples, "kfold", seed=0, k=5)
    sizes = sorted(len(f.test_ids) for f in spec.folds)
    assert sizes == [23, 23, 23, 24, 24]


def test_kfold_disjoint_cover_and_complement():
    samples = make_pool(23, 4)
    spec = make_folds(samples, "kfold", seed=1, k=5)
    all_ids = {s.sample_id for s in samples}
    seen = []
    for fold in spec.folds:
        seen.extend(fold.test_ids)
        assert set(fold.train_ids) | set(fold.test_ids) == all_ids
        assert not set(fold.train_ids) & set(fold.test_ids)
    assert sorted(seen) == sorted(all_ids)


def test_kfold_seed_determinism_and_sensitivity():
    samples = make_pool(30, 5)
    a = make_folds(samples, "kfold", seed=9, k=5)
    b = make_folds(samples, "kfold", seed=9, k=5)
    c = make_folds(samples, "kfold", seed=10, k=5)
    assert [f.test_ids for f in a.folds] == [f.test_ids for f in b.folds]
    assert [f.test_ids for f in a.folds] != [f.test_ids for f in c.folds]


def test_kfold_domain_errors():
    samples = make_pool(4, 2)
    with pytest.raises(ValueError, match="k >= 2"):
        make_folds(samples, "kfold", k=1)
    with pytest.raises(ValueError, match="exceeds"):
        make_folds(samples, "kfold", k=5)
    with pytest.raises(ValueError, match="scheme"):
        make_folds(samples, "quadrant")


def test_loso_one_fold_per_subject_sorted():
    samples = make_pool(12, 4)
    spec = make_folds(samples, "loso")
    assert len(spec.folds) == 4
    held = []
    for fold in spec.folds:
        subjects = {s.subject for s in samples if s.sample_id in fold.test_ids}
        assert len(subjects) == 1
        train_subjects = {s.subject for s in samples if s.sample_id in fold.train_ids}
        assert not subjects & train_subjects
        held.append(subjects.pop())
    assert held == sorted(held)


def test_l2so_pairs_even_and_odd():
    even = make_folds(make_pool(12, 6), "l2so")
    assert len(even.folds) == 3
    odd = make_folds(make_pool(14, 7), "l2so")
    assert len(odd.folds) == 4
    samples = make_pool(14, 7)
    per_fold_subjects = [sorted({s.subject for s in samples
                                 if s.sample_id in f.test_ids})
                         for f in odd.folds]
    assert per_fold_subjects == [["subj00", "subj01"], ["subj02", "subj03"],
                                 ["subj04", "subj05"], ["subj06"]]


def test_subject_schemes_need_enough_subjects():
    with pytest.raises(ValueError, match="at least 2 subjects"):
        make_folds(make_pool(6, 1), "loso")
    with pytest.raises(ValueError, match="at least 3 subjects"):
        make_folds(make_pool(6, 2), "l2so")


def test_duplicate_ids_rejected():
    samples = [make_sample("dup", "a"), make_sample("dup", "b")]
    with pytest.raises(ValueError, match="duplicate"):
        make_folds(samples, "kfold", k=2)


# ---------------------------------------------------------------------------
# cross-validation with injected predictors


def oracle_trainer(train_samples, fold_seed):
    return lambda s: float(s.step_count)


def mean_trainer(train_samples, fold_seed):
    mean = float(np.mean([s.step_count for s in train_samples]))
    return lambda s: mean


def test_evaluate_cv_oracle_predictor_is_perfect():
    samples = [make_sample(f"s{i}", f"subj{i % 5}", steps=5 + i) for i in range(20)]
    res = evaluate_cv(samples, "kfold", k=4, trainer=oracle_trainer)
    assert isinstance(res, CvResult)
    assert res.report.mae == 0.0
    assert res.report.acc_mean == 100.0
    assert res.report.uc == 0.0 and res.report.oc == 0.0
    assert len(res.predictions) == 20
    assert len(res.fold_reports) == 4


def test_evaluate_cv_pooled_report_matches_recomputation():
    samples = [make_sample(f"s{i}", f"subj{i % 5}", steps=5 + i) for i in range(20)]
    res = evaluate_cv(samples, "loso", trainer=mean_trainer)
    preds = [p.pred for p in res.predictions]
    trues = [p.true for p in res.predictions]
    again = compute_report(preds, trues)
    assert res.report.mae == pytest.approx(again.mae, abs=1e-12)
    assert res.report.er_mean == pytest.approx(again.er_mean, abs=1e-12)
    assert res.report.acc_std == pytest.approx(again.acc_std, abs=1e-12)


def test_evaluate_cv_predictions_respect_fold_membership():
    samples = [make_sample(f"s{i}", f"subj{i % 4}", steps=8 + i) for i in range(16)]
    res = evaluate_cv(samples, "loso", trainer=mean_trainer)
    for rec in res.predictions:
        fold = res.folds.folds[rec.fold]
        assert rec.sample_id in fold.test_ids
        assert rec.sample_id not in fold.train_ids
        train_subjects = {s.subject for s in samples if s.sample_id in fold.train_ids}
        assert rec.subject not in train_subjects


def test_evaluate_cv_round_predictions():
    samples = [make_sample(f"s{i}", f"subj{i % 5}", steps=10) for i in range(10)]
    res = evaluate_cv(samples, "kfold", k=2, round_predictions=True,
                      trainer=lambda tr, seed: (lambda s: 9.4))
    assert all(p.pred == 9.0 for p in res.predictions)


def test_evaluate_cv_needs_two_folds():
    samples = [make_sample(f"s{i}", "only", steps=10) for i in range(6)]
    with pytest.raises(ValueError, match="subjects"):
        evaluate_cv(samples, "loso", trainer=oracle_trainer)


def test_evaluate_cv_needs_configs_without_trainer():
    samples = [make_sample(f"s{i}", f"subj{i % 3}", steps=10) for i in range(9)]
    with pytest.raises(ValueError, match="model_config"):
        evaluate_cv(samples, "kfold", k=3)


def test_fold_seeds_passed_to_trainer():
    from steplab.train import TrainConfig
    seen = []

    def spy(train_samples, fold_seed):
        seen.append(fold_seed)
        return lambda s: 1.0

    samples = [make_sample(f"s{i}", f"subj{i % 3}", steps=10) for i in range(9)]
    evaluate_cv(samples, "kfold", k=3, trainer=spy,
                train_config=TrainConfig(seed=100))
    assert seen == [100, 101, 102]


# ---------------------------------------------------------------------------
# rendering


def test_render_report_text_keys():
    rep = compute_report([9.0, 12.0], [10.0, 10.0])
    text = render_report_text(rep, label="demo")
    lines = dict(l.split(" ", 1) for l in text.strip().splitlines())
    assert lines["label"] == "demo"
    assert lines["n_samples"] == "2"
    assert float(lines["mae"]) == pytest.approx(1.5)
    assert float(lines["uc"]) == pytest.approx(5.0)
    assert float(lines["oc"]) == pytest.approx(10.0)
    assert float(lines["acc_mean_frac"]) == pytest.approx(
        float(lines["acc_mean"]) / 100.0, rel=1e-5)


def test_render_report_csv_round_trips():
    rep = compute_report([9.0, 12.0], [10.0, 10.0])
    text = render_report_csv([("overall", rep)])
    header, row = text.strip().splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert cols["label"] == "overall"
    assert float(cols["mae"]) == rep.mae
    assert float(cols["rca_std"]) == rep.rca_std


def test_render_predictions_csv():
    samples = [make_sample(f"s{i}", f"subj{i % 5}", steps=5 + i) for i in range(10)]
    res = evaluate_cv(samples, "kfold", k=2, trainer=oracle_trainer)
    text = render_predictions_csv(res.predictions)
    lines = text.strip().splitlines()
    assert lines[0] == "id,subject,fold,true,pred"
    assert len(lines) == 11
    first = lines[1].split(",")
    assert first[0].startswith("s")
    assert float(first[3]) == float(first[4])
