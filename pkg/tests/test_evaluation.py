import math

import numpy as np
import pytest

from shapecast import constraints, data, evaluation, predictors, trainer
from shapecast.errors import (AllCandidatesFailed, DegenerateVariance,
                              DimMismatch, EmptyTestSet, ReportMismatch,
                              TooShort, ZeroBaseline)


def report_from_profile(profile, mode="erm", dataset="d"):
    return evaluation.EvalReport.build(mode, dataset, profile)


# --- evaluate -----------------------------------------------------------------

def test_evaluate_hand_profile():
    # zero-initialized linear model predicts 0, so MSE_i = mean(y_i^2)
    dims = predictors.PredictorDims(context_len=2, pred_len=3)
    p = predictors.init_params("direct_linear", dims)
    contexts = np.zeros((2, 2, 1))
    targets = np.sqrt([1.0, 2.0, 3.0])[None, :, None] * np.ones((2, 1, 1))
    batch = data.WindowBatch(contexts, targets)
    rep = evaluation.evaluate(p, batch, mode="erm", dataset="toy")
    np.testing.assert_allclose(rep.per_step_mse, [1.0, 2.0, 3.0], atol=1e-12)
    assert rep.mean_mse == pytest.approx(2.0)
    assert rep.window_std == pytest.approx(math.sqrt(2.0 / 3.0))
    assert math.isnan(rep.max_violation)
    spec = constraints.ConstraintSpec("constant", [2.0, 2.0, 2.0])
    rep = evaluation.evaluate(p, batch, spec=spec)
    assert rep.max_violation == pytest.approx(1.0)  # step 3: 3 - 2


def test_evaluate_rejects_empty_test_set():
    dims = predictors.PredictorDims(context_len=2, pred_len=3)
    p = predictors.init_params("direct_linear", dims)
    with pytest.raises(EmptyTestSet):
        evaluation.evaluate(p, None)
    empty = data.WindowBatch(np.zeros((0, 2, 1)), np.zeros((0, 3, 1)))
    with pytest.raises(EmptyTestSet):
        evaluation.evaluate(p, empty)


# --- compare ---------------------------------------------------------------------

def test_compare_self_is_zero_percent():
    rep = report_from_profile([1.0, 2.0, 3.0])
    cmp = evaluation.compare(rep, rep)
    assert cmp.pct_mean_mse == 0.0
    assert cmp.pct_window_std == 0.0
    np.testing.assert_array_equal(cmp.per_step_pct, np.zeros(3))


def test_compare_hand_percentages():
    base = report_from_profile([1.0, 2.0])
    cand = report_from_profile([1.5, 1.0], mode="constrained")
    cmp = evaluation.compare(base, cand)
    np.testing.assert_allclose(cmp.per_step_pct, [50.0, -50.0])
    assert cmp.pct_mean_mse == pytest.approx(100.0 * (1.25 - 1.5) / 1.5)
    assert cmp.baseline_mode == "erm"
    assert cmp.candidate_mode == "constrained"


def test_compare_mismatch_and_zero_guards():
    with pytest.raises(ReportMismatch):
        evaluation.compare(report_from_profile([1.0, 2.0]),
                           report_from_profile([1.0, 2.0, 3.0]))
    with pytest.raises(ReportMismatch):
        evaluation.compare(report_from_profile([1.0, 2.0], dataset="a"),
                           report_from_profile([1.0, 2.0], dataset="b"))
    with pytest.raises(ZeroBaseline):
        evaluation.compare(report_from_profile([0.0, 0.0]),
                           report_from_profile([1.0, 2.0]))
    with pytest.raises(ZeroBaseline):
        evaluation.compare(report_from_profile([0.0, 1.0]),
                           report_from_profile([1.0, 2.0]))


# --- rank statistics ----------------------------------------------------------------

def test_spearman_hand_values():
    assert evaluation.spearman_train_test(
        [1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]) == pytest.approx(0.8)
    assert evaluation.spearman_train_test(
        [1.0, 2.0, 3.0], [10.0, 20.0, 30.0]) == pytest.approx(1.0)
    assert evaluation.spearman_train_test(
        [1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)


def test_spearman_ties_use_average_ranks():
    # ranks (1.5, 1.5, 3, 4) vs (1, 2, 3, 4): r = sqrt(0.9)
    r = evaluation.spearman_train_test([1.0, 1.0, 2.0, 3.0],
                                       [1.0, 2.0, 3.0, 4.0])
    assert r == pytest.approx(math.sqrt(0.9), abs=1e-12)


def test_spearman_degenerate_and_guards():
    assert evaluation.spearman_train_test([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert evaluation.spearman_train_test([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None
    with pytest.raises(DimMismatch):
        evaluation.spearman_train_test([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(TooShort):
        evaluation.spearman_train_test([1.0], [2.0])


def test_pearson_across_lengths():
    # (0, 2) resampled onto 3 points is exactly (0, 1, 2)
    r = evaluation.pearson_across_lengths([0.0, 2.0], [0.0, 1.0, 2.0])
    assert r == pytest.approx(1.0, abs=1e-12)
    r = evaluation.pearson_across_lengths([2.0, 0.0], [0.0, 1.0, 2.0])
    assert r == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(DegenerateVariance):
        evaluation.pearson_across_lengths([1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(TooShort):
        evaluation.pearson_across_lengths([1.0], [0.0, 1.0])


def test_resample_profile_alignment():
    out = evaluation.resample_profile([3.0, 7.0, 9.0], 5)
    np.testing.assert_allclose(out, [3.0, 5.0, 7.0, 8.0, 9.0], atol=1e-12)
    out = evaluation.resample_profile([1.0, 4.0], 2)
    np.testing.assert_array_equal(out, [1.0, 4.0])
    with pytest.raises(TooShort):
        evaluation.resample_profile([1.0], 4)


# --- grid search --------------------------------------------------------------------

def grid_setup():
    ds = data.synth_heteroscedastic(300, 1, 0.5, seed=1)
    windows, _ = data.prepare_windows(ds, data.WindowConfig(6, 3))
    dims = predictors.PredictorDims(context_len=6, pred_len=3, hidden=2)
    cfg = trainer.TrainConfig(mode="constrained", optimizer="adam",
                              primal_lr=0.01, dual_lr=0.01, epochs=2,
                              batch_size=32, early_stopping=False, seed=0)
    return windows, dims, cfg


def test_grid_tie_breaks_to_smaller_epsilon():
    windows, dims, cfg = grid_setup()
    # both bounds are far above any reachable loss, so the two runs are
    # identical and tie on validation score; larger level listed first
    big = constraints.ConstraintSpec("constant", [2e6] * 3, label="big")
    small = constraints.ConstraintSpec("constant", [1e6] * 3, label="small")
    res = evaluation.grid_search(windows, "mlp1", dims, cfg, [big, small])
    assert len(res.entries) == 2
    assert res.entries[0].val_mean_mse == res.entries[1].val_mean_mse
    assert res.best.spec.label == "small"


def test_grid_collects_failures_and_raises_when_all_fail():
    windows, dims, cfg = grid_setup()
    bad = constraints.ConstraintSpec("monotonic", label="bad")
    good = constraints.ConstraintSpec("constant", [1e6] * 3, label="good")
    res = evaluation.grid_search(windows, "mlp1", dims, cfg, [bad, good])
    assert [label for label, _ in res.failures] == ["bad"]
    assert res.best.spec.label == "good"
    with pytest.raises(AllCandidatesFailed):
        evaluation.grid_search(windows, "mlp1", dims, cfg, [bad])


def test_grid_keeps_unmet_candidate_with_positive_violation():
    windows, dims, cfg = grid_setup()
    # an unreachable bound: the run completes and the report records how
    # far the final model still is from it
    tight = constraints.ConstraintSpec("constant", [1e-9] * 3, label="tight")
    res = evaluation.grid_search(windows, "mlp1", dims, cfg, [tight])
    assert res.best.report.max_violation > 0


# --- persistence -----------------------------------------------------------------------

def test_report_round_trip(tmp_path):
    rep = evaluation.EvalReport.build(
        "constrained:val_q50", "synth", [0.3, 0.7, 1.1],
        fingerprint="abcd1234abcd1234", max_violation=-0.25)
    path = tmp_path / "report.txt"
    evaluation.save_report(rep, path)
    back = evaluation.load_report(path)
    assert back.mode == rep.mode
    assert back.dataset == rep.dataset
    assert back.pred_len == rep.pred_len
    assert back.fingerprint == rep.fingerprint
    assert back.mean_mse == rep.mean_mse
    assert back.window_std == rep.window_std
    assert back.max_violation == rep.max_violation
    np.testing.assert_array_equal(back.per_step_mse, rep.per_step_mse)


def test_report_round_trip_keeps_nan_violation(tmp_path):
    rep = evaluation.EvalReport.build("erm", "synth", [0.5, 0.5])
    path = tmp_path / "report.txt"
    evaluation.save_report(rep, path)
    assert math.isnan(evaluation.load_report(path).max_violation)


def test_csv_exports(tmp_path):
    rep = evaluation.EvalReport.build("erm", "synth", [0.25, 0.5])
    per_step = tmp_path / "per_step.csv"
    evaluation.save_per_step_csv(rep, per_step)
    assert per_step.read_text() == "step,mse\n1,0.25\n2,0.5\n"
    summary = tmp_path / "summary.csv"
    evaluation.save_summary_csv(rep, summary)
    lines = summary.read_text().splitlines()
    assert lines[0] == "mode,dataset,pred_len,mean_mse,window_std"
    assert lines[1].startswith("erm,synth,2,0.375,")

    cand = evaluation.EvalReport.build("constrained", "synth", [0.5, 0.25])
    cmp = evaluation.compare(rep, cand)
    merged = tmp_path / "merged.csv"
    evaluation.save_merged_csv(cmp, merged)
    assert merged.read_text() == (
        "step,mse_baseline,mse_candidate\n1,0.25,0.5\n2,0.5,0.25\n")
    comparison = tmp_path / "comparison.txt"
    evaluation.save_comparison(cmp, comparison)
    text = comparison.read_text()
    assert "kind = comparison" in text
    assert "per_step_pct = 100.0,-50.0" in text
