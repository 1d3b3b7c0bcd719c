"""Acceptance gate: the nine behaviors this package promises, end to end.

Each criterion is one test, so `pytest -v` prints one pass/fail line per
criterion. Budgeted runtimes are asserted where a criterion carries one.

1. Convex oracle equivalence of the constrained trainer.
2. Resilient stationarity (alpha*zeta = lambda) and agreement of the two
   resilient variants.
3. Analytic gradients vs central finite differences, all architectures.
4. Loss shaping on the heteroscedastic benchmark: best-of-grid constrained
   training cuts Window STD >= 20% at <= +10% mean MSE on >= 4 of 5 seeds.
5. Constrained training with multipliers frozen at zero IS the unweighted
   baseline, bitwise.
6. Far-slack bounds: multipliers collapse and the model matches the
   unweighted baseline per step.
7. Exponential-profile fitting, grid search end to end, and monotonic mode
   flattening the test error profile.
8. Hand-derived metric values pass exactly.
9. Identical config + seed reproduces artifacts byte for byte, and every
   artifact re-parses.
"""

import csv
import math
import pathlib
import time

import numpy as np
import pytest

from shapecast import (cli, constraints, data, evaluation, oracle,
                       predictors, trainer)
from shapecast.config import RunConfig

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"
FIXTURE_NAMES = ("tied_one_active", "tied_two_active", "tied_inactive",
                 "tied_exponential", "direct_inactive")
FULL_BATCH = 10 ** 9


# --- shared setup ---------------------------------------------------------------

@pytest.fixture(scope="module")
def convex_fixtures():
    out = []
    for name in FIXTURE_NAMES:
        inst, frozen = oracle.load_instance(FIXTURE_DIR / f"{name}.txt")
        assert frozen is not None
        out.append((name, inst, frozen))
    return out


def instance_windows(inst):
    return data.SplitWindows(train=inst.windows)


def convex_cfg(mode):
    return trainer.TrainConfig(
        mode=mode, optimizer="sgd", primal_lr=0.05, dual_lr=0.1,
        slack_lr=0.1, epochs=4000, batch_size=FULL_BATCH, dual_init=1.0,
        early_stopping=False, seed=0)


def benchmark_windows(seed, hidden):
    ds = data.synth_heteroscedastic(5000, 1, 0.5, seed=seed)
    windows, _ = data.prepare_windows(ds, data.WindowConfig(48, 24))
    dims = predictors.PredictorDims(48, 24, 1, hidden=hidden)
    return windows, dims


def benchmark_erm(windows, dims, seed):
    cfg = trainer.TrainConfig(mode="erm", optimizer="adam", primal_lr=0.01,
                              epochs=10, batch_size=64, seed=seed,
                              early_stopping=True)
    return trainer.train(windows, predictors.init_params("mlp1", dims, seed),
                         cfg)


@pytest.fixture(scope="module")
def shaping_benchmark():
    """ERM vs best-of-grid constrained, seeds 0..4, on the heteroscedastic
    benchmark (length 5000, noise growth 0.5, context 48, horizon 24)."""
    t0 = time.time()
    rows = []
    grid_example = None
    for seed in range(5):
        windows, dims = benchmark_windows(seed, hidden=2)
        erm = benchmark_erm(windows, dims, seed)
        erm_rep = evaluation.evaluate(erm.params, windows.test, mode="erm")
        specs = constraints.epsilon_grid(
            predictors.step_losses(erm.params, windows.train),
            predictors.step_losses(erm.params, windows.val))
        cons_cfg = trainer.TrainConfig(
            mode="constrained", optimizer="adam", primal_lr=0.01,
            dual_lr=0.01, epochs=10, batch_size=64, dual_init=1.0,
            seed=seed, early_stopping=False)
        grid = evaluation.grid_search(windows, "mlp1", dims, cons_cfg, specs)
        if grid_example is None:
            grid_example = grid
        cmp = evaluation.compare(erm_rep, grid.best.report)
        rows.append((seed, cmp.pct_window_std, cmp.pct_mean_mse))
    return {"rows": rows, "grid_example": grid_example,
            "seconds": time.time() - t0}


# --- criteria ----------------------------------------------------------------------

def test_criterion_1_convex_oracle_equivalence(convex_fixtures):
    t0 = time.time()
    for name, inst, frozen in convex_fixtures:
        params0 = predictors.init_params(inst.arch(), inst.predictor_dims())
        trace = trainer.train(instance_windows(inst), params0,
                              convex_cfg("constrained"), inst.spec)
        losses = predictors.step_losses(trace.params, inst.windows)
        objective = float(np.mean(losses))
        assert abs(objective - frozen["primal_value"]) <= \
            0.01 * abs(frozen["primal_value"]), name
        slacks = losses - inst.spec.epsilon
        assert np.max(slacks) <= 1e-3, name
        assert np.max(np.abs(trace.final_lam * slacks)) <= 1e-3, name
    elapsed = time.time() - t0
    assert elapsed < 30.0
    print(f"criterion 1 PASS: {len(convex_fixtures)} instances, "
          f"objective within 1%, violation and lambda*s <= 1e-3 "
          f"({elapsed:.1f}s)")


def test_criterion_2_resilient_stationarity(convex_fixtures):
    relax = constraints.RelaxationCost(1.0)
    for name, inst, frozen in convex_fixtures:
        params0 = predictors.init_params(inst.arch(), inst.predictor_dims())
        res = trainer.train(instance_windows(inst), params0,
                            convex_cfg("resilient"), inst.spec, relax)
        gap = np.max(np.abs(relax.alpha * res.final_zeta - res.final_lam))
        assert gap <= 1e-3, name
        dual = trainer.train(instance_windows(inst), params0,
                             convex_cfg("resilient_dualreg"), inst.spec, relax)
        np.testing.assert_allclose(dual.final_lam, res.final_lam,
                                   atol=1e-2, err_msg=name)
    print("criterion 2 PASS: alpha*zeta matches lambda <= 1e-3 and the "
          "two resilient variants agree on lambda <= 1e-2")


def test_criterion_3_gradient_correctness():
    t0 = time.time()
    rng = np.random.default_rng(0)
    for arch in ("direct_linear", "tied_linear", "mlp1"):
        worst = 0.0
        for _ in range(100):
            tc = int(rng.integers(1, 5))
            tp = int(rng.integers(1, 5))
            nch = int(rng.integers(1, 3))
            hidden = int(rng.integers(1, 5))
            B = int(rng.integers(1, 9))
            dims = predictors.PredictorDims(tc, tp, nch, hidden=hidden)
            p = predictors.init_params(arch, dims, seed=int(rng.integers(0, 999)))
            p.theta[:] = rng.normal(0, 1, p.theta.shape)
            batch = data.WindowBatch(rng.normal(0, 1, (B, tc, nch)),
                                     rng.normal(0, 1, (B, tp, nch)))
            w = rng.uniform(-0.5, 1.5, tp)
            _, _, grad = predictors.weighted_loss_grad(p, batch, w)
            fd = oracle.fd_gradient(p, batch, w)
            denom = max(1.0, float(np.max(np.abs(grad))))
            worst = max(worst, float(np.max(np.abs(fd - grad))) / denom)
        assert worst <= 1e-4, f"{arch}: {worst}"
    elapsed = time.time() - t0
    assert elapsed < 10.0
    print(f"criterion 3 PASS: 100 triples per architecture, relative "
          f"error <= 1e-4 ({elapsed:.1f}s)")


def test_criterion_4_loss_shaping_benchmark(shaping_benchmark):
    rows = shaping_benchmark["rows"]
    hits = sum(1 for _, pct_std, pct_mse in rows
               if pct_std <= -20.0 and pct_mse <= 10.0)
    detail = " ".join(f"s{seed}:{pct_std:+.1f}%/{pct_mse:+.1f}%"
                      for seed, pct_std, pct_mse in rows)
    assert hits >= 4, detail
    assert shaping_benchmark["seconds"] < 300.0
    print(f"criterion 4 PASS: {hits}/5 seeds cut Window STD >= 20% at "
          f"<= +10% MSE [{detail}] ({shaping_benchmark['seconds']:.1f}s)")


def test_criterion_5_frozen_duals_reproduce_baseline_bitwise(tmp_path):
    ds = data.synth_heteroscedastic(400, 1, 1.0, seed=3)
    windows, _ = data.prepare_windows(ds, data.WindowConfig(8, 4))
    dims = predictors.PredictorDims(8, 4, 1, hidden=6)
    spec = constraints.ConstraintSpec("constant", [0.5] * 4)
    p0 = predictors.init_params("mlp1", dims, seed=1)

    erm_cfg = trainer.TrainConfig(mode="erm", optimizer="adam",
                                  primal_lr=0.01, epochs=5, batch_size=32,
                                  early_stopping=False, seed=7)
    erm = trainer.train(windows, p0, erm_cfg, spec)
    frz_cfg = trainer.TrainConfig(mode="constrained", optimizer="adam",
                                  primal_lr=0.01, epochs=5, batch_size=32,
                                  dual_init=0.0, freeze_duals=True,
                                  early_stopping=False, seed=7)
    frz = trainer.train(windows, p0, frz_cfg, spec)

    def record_text(trace, name):
        path = tmp_path / name
        trainer.save_trace(trace, path)
        lines = path.read_text().splitlines()
        return "\n".join(ln for ln in lines if not ln.startswith("mode ="))

    assert record_text(erm, "erm.txt") == record_text(frz, "frozen.txt")
    assert np.array_equal(erm.params.theta, frz.params.theta)
    print("criterion 5 PASS: frozen-multiplier trace and parameters are "
          "bitwise identical to the unweighted baseline")


def test_criterion_6_slack_bounds_collapse_to_baseline():
    ds = data.synth_heteroscedastic(800, 1, 0.5, seed=0)
    windows, _ = data.prepare_windows(ds, data.WindowConfig(8, 4))
    dims = predictors.PredictorDims(8, 4, 1)
    p0 = predictors.init_params("direct_linear", dims, seed=0)
    erm_cfg = trainer.TrainConfig(mode="erm", optimizer="sgd", primal_lr=0.05,
                                  epochs=1500, batch_size=FULL_BATCH,
                                  early_stopping=False, seed=0)
    erm = trainer.train(windows, p0, erm_cfg)

    level = 1e3 * float(np.max(predictors.step_losses(erm.params,
                                                      windows.train)))
    spec = constraints.ConstraintSpec("constant", [level] * 4)
    cons_cfg = trainer.TrainConfig(mode="constrained", optimizer="sgd",
                                   primal_lr=0.05, dual_lr=0.1, dual_init=1.0,
                                   epochs=1500, batch_size=FULL_BATCH,
                                   early_stopping=False, seed=0)
    cons = trainer.train(windows, p0, cons_cfg, spec)

    assert np.max(cons.final_lam) < 1e-3 * cons_cfg.dual_init
    erm_test = predictors.step_losses(erm.params, windows.test)
    cons_test = predictors.step_losses(cons.params, windows.test)
    worst = float(np.max(np.abs(cons_test - erm_test)))
    assert worst <= 1e-3
    print(f"criterion 6 PASS: multipliers < 1e-3 of dual_init and per-step "
          f"test MSE within {worst:.2e} of baseline")


def test_criterion_7_exponential_and_monotonic_protocol(shaping_benchmark):
    # exponential fit recovers an exact exponential profile
    small = np.exp(np.arange(1.0, 4.0))
    np.testing.assert_allclose(constraints.exponential_fit(small).epsilon,
                               small, atol=1e-9)
    horizon = np.exp(np.arange(1.0, 25.0))
    np.testing.assert_allclose(constraints.exponential_fit(horizon).epsilon,
                               horizon, rtol=1e-9)

    # grid search ran end to end on the benchmark
    grid = shaping_benchmark["grid_example"]
    assert len(grid.entries) == 6
    assert not grid.failures
    assert grid.best.report.pred_len == 24

    # monotonic mode flattens the test error profile vs its own baseline
    seed = 4
    windows, dims = benchmark_windows(seed, hidden=4)
    erm = benchmark_erm(windows, dims, seed)
    erm_rep = evaluation.evaluate(erm.params, windows.test, mode="erm")
    mono_cfg = trainer.TrainConfig(mode="monotonic", optimizer="adam",
                                   primal_lr=0.01, dual_lr=0.02,
                                   dual_init=0.0, epochs=10, batch_size=64,
                                   seed=seed, early_stopping=False)
    mono = trainer.train(windows, predictors.init_params("mlp1", dims, seed),
                         mono_cfg, constraints.ConstraintSpec("monotonic"))
    mono_rep = evaluation.evaluate(mono.params, windows.test, mode="monotonic")

    viol = lambda v: int(np.sum(v[:-1] > v[1:]))
    pairs = mono_rep.pred_len - 1
    mono_viol = viol(mono_rep.per_step_mse)
    erm_viol = viol(erm_rep.per_step_mse)
    assert mono_viol <= 0.2 * pairs, (mono_viol, pairs)
    assert erm_viol > mono_viol, (erm_viol, mono_viol)
    print(f"criterion 7 PASS: exponential profile recovered; grid ran end "
          f"to end; monotonic ordering violated at {mono_viol}/{pairs} "
          f"pairs vs baseline {erm_viol}/{pairs}")


def test_criterion_8_metric_hand_values():
    rep = evaluation.EvalReport.build("erm", "d", [1.0, 2.0, 3.0])
    assert rep.window_std == pytest.approx(math.sqrt(2.0 / 3.0), rel=1e-12)
    assert evaluation.spearman_train_test(
        [1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]) == pytest.approx(
        0.8, abs=1e-12)
    assert evaluation.pearson_across_lengths(
        [0.0, 2.0], [0.0, 1.0, 2.0]) == pytest.approx(1.0, abs=1e-12)
    specs = constraints.epsilon_grid(np.array([1.0, 2.0, 3.0, 4.0]),
                                     np.array([10.0, 20.0, 30.0, 40.0]))
    np.testing.assert_array_equal(
        sorted(s.epsilon[0] for s in specs),
        [1.75, 2.5, 3.25, 17.5, 25.0, 32.5])
    print("criterion 8 PASS: Window STD, Spearman, resampled Pearson and "
          "quantile-grid hand values exact")


def test_criterion_9_determinism_and_artifact_round_trip(tmp_path):
    cfg_text = (
        "data.source = synth\n"
        "data.length = 300\n"
        "data.noise_growth = 0.5\n"
        "data.seed = 1\n"
        "window.context_len = 6\n"
        "window.pred_len = 3\n"
        "model.arch = mlp1\n"
        "model.hidden = 2\n"
        "train.mode = erm\n"
        "train.primal_lr = 0.01\n"
        "train.epochs = 2\n"
        "train.batch_size = 32\n"
        "train.early_stopping = false\n"
        "train.seed = 0\n")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(cfg_text)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["train", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert cli.main(["train", "--config", str(cfg), "--out", str(out_b)]) == 0

    names = ("config_resolved.txt", "checkpoint.txt", "trace.txt",
             "report.txt", "per_step.csv", "summary.csv")
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    # every artifact re-parses through its own loader
    rc = RunConfig.from_file(str(out_a / "config_resolved.txt"))
    assert rc.fingerprint() in (out_a / "report.txt").read_text()
    predictors.load_checkpoint(str(out_a / "checkpoint.txt"))
    trainer.load_trace(str(out_a / "trace.txt"))
    report_a = evaluation.load_report(str(out_a / "report.txt"))
    for csv_name, width in (("per_step.csv", 2), ("summary.csv", 5)):
        with open(out_a / csv_name, newline="") as fh:
            rows = list(csv.reader(fh))
        assert all(len(r) == width for r in rows)
        assert float(rows[1][-1]) >= 0.0

    # grid artifacts
    grid_cfg = tmp_path / "grid.cfg"
    grid_cfg.write_text(cfg_text.replace("train.mode = erm",
                                         "train.mode = constrained")
                        + "constraint.source = explicit\n"
                        + "constraint.epsilon = 1.0,1.0,1.0\n"
                        + f"grid.erm_dir = {out_a}\n")
    out_g = tmp_path / "g"
    assert cli.main(["grid", "--config", str(grid_cfg),
                     "--out", str(out_g)]) == 0
    best = {}
    for line in (out_g / "best.txt").read_text().splitlines():
        key, sep, val = line.partition("=")
        assert sep, line
        best[key.strip()] = val.strip()
    assert best["kind"] == "grid_best"
    assert int(best["candidates"]) == 6
    cand_report = evaluation.load_report(
        str(out_g / f"cand_{best['label']}" / "report.txt"))

    # comparison artifacts
    out_c = tmp_path / "c"
    assert cli.main(["compare", str(out_a / "report.txt"),
                     str(out_g / f"cand_{best['label']}" / "report.txt"),
                     "--out", str(out_c)]) == 0
    comparison = (out_c / "comparison.txt").read_text()
    assert "kind = comparison" in comparison
    with open(out_c / "merged.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "mse_baseline", "mse_candidate"]
    assert len(rows) == 1 + report_a.pred_len
    np.testing.assert_allclose(
        [float(r[2]) for r in rows[1:]], cand_report.per_step_mse)
    print("criterion 9 PASS: byte-identical rerun and every artifact "
          "re-parses")
