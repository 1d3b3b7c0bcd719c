"""Calibration harness for the heteroscedastic shaping benchmark.

Sweeps free knobs (hidden size, primal lr, batch size) across seeds and
reports, per seed: the ERM baseline, the grid winner, its Window STD and
MSE changes, and the monotonic-mode adjacent-pair violations. Run from
the repo root:

    python tools/tune_benchmark.py --hidden 4 --lr 0.01 --batch 64
"""

import argparse
import sys
import time

import numpy as np

from shapecast import data, evaluation as ev, predictors as pr, trainer as tn
from shapecast.constraints import ConstraintSpec, epsilon_grid


def run_seed(seed, hidden, lr, batch, epochs=10, length=5000, growth=0.5,
             tc=48, tp=24, verbose=True, monotonic=False):
    ds = data.synth_heteroscedastic(length, 1, growth, seed=seed)
    windows, _ = data.prepare_windows(ds, data.WindowConfig(tc, tp))
    dims = pr.PredictorDims(tc, tp, 1, hidden=hidden)

    t0 = time.time()
    erm_cfg = tn.TrainConfig(mode="erm", optimizer="adam", primal_lr=lr,
                             epochs=epochs, batch_size=batch, seed=seed,
                             early_stopping=True)
    erm = tn.train(windows, pr.init_params("mlp1", dims, seed), erm_cfg)
    erm_rep = ev.evaluate(erm.params, windows.test, mode="erm")
    train_err = pr.step_losses(erm.params, windows.train)
    val_err = pr.step_losses(erm.params, windows.val)

    cons_cfg = tn.TrainConfig(mode="constrained", optimizer="adam",
                              primal_lr=lr, dual_lr=0.01, epochs=epochs,
                              batch_size=batch, dual_init=1.0, seed=seed,
                              early_stopping=False)
    grid = ev.grid_search(windows, "mlp1", dims, cons_cfg,
                          epsilon_grid(train_err, val_err))
    best = grid.best
    cmp = ev.compare(erm_rep, best.report)
    row = {
        "seed": seed,
        "erm_mse": erm_rep.mean_mse, "erm_std": erm_rep.window_std,
        "best": best.spec.label, "best_mse": best.report.mean_mse,
        "best_std": best.report.window_std,
        "pct_std": cmp.pct_window_std, "pct_mse": cmp.pct_mean_mse,
        "secs": time.time() - t0,
    }
    if verbose:
        cand = " ".join(f"{e.spec.label}:{e.val_mean_mse:.4f}" for e in grid.entries)
        print(f"  [seed {seed}] val MSEs: {cand}")
        print(f"  [seed {seed}] erm per-step: {np.round(erm_rep.per_step_mse, 3)}")
        print(f"  [seed {seed}] win per-step: {np.round(best.report.per_step_mse, 3)}")
    if monotonic:
        mono_cfg = tn.TrainConfig(mode="monotonic", optimizer="adam",
                                  primal_lr=lr, dual_lr=0.01, epochs=epochs,
                                  batch_size=batch, dual_init=1.0, seed=seed,
                                  early_stopping=False)
        mono = tn.train(windows, pr.init_params("mlp1", dims, seed), mono_cfg,
                        ConstraintSpec("monotonic"))
        mono_rep = ev.evaluate(mono.params, windows.test, mode="monotonic")
        viol = lambda v: int(np.sum(v[:-1] > v[1:]))
        row["mono_viol"] = viol(mono_rep.per_step_mse)
        row["erm_viol"] = viol(erm_rep.per_step_mse)
    return row


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--hidden", type=int, default=4)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--monotonic", action="store_true")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args()

    t0 = time.time()
    ok = 0
    for seed in range(args.seeds):
        row = run_seed(seed, args.hidden, args.lr, args.batch, args.epochs,
                       verbose=not args.quiet, monotonic=args.monotonic)
        hit = row["pct_std"] <= -20.0 and row["pct_mse"] <= 10.0
        ok += hit
        extra = ""
        if args.monotonic:
            extra = f" mono_viol={row['mono_viol']} erm_viol={row['erm_viol']}"
        print(f"seed {seed}: best={row['best']:<9} dSTD {row['pct_std']:+7.1f}% "
              f"dMSE {row['pct_mse']:+6.1f}% {'PASS' if hit else 'fail'}"
              f"{extra}  ({row['secs']:.1f}s)")
    print(f"=> {ok}/{args.seeds} seeds pass; total {time.time() - t0:.1f}s "
          f"(hidden={args.hidden} lr={args.lr} batch={args.batch})")


if __name__ == "__main__":
    sys.exit(main())
