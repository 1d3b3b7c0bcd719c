"""Command-line entry point: train, grid, and compare subcommands.

Every run is driven by a config file (see config.py for the schema); the
only flags are --config, --out, and --seed, so a config file plus a seed
fully determines a run. Artifacts are plain text and CSV, contain no
timestamps, and embed the resolved-config fingerprint, so rerunning the
same config and seed reproduces them byte for byte.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

import argparse
import os
import sys

import numpy as np

from . import data, evaluation, predictors, trainer
from .config import RunConfig
from .constraints import (ConstraintSpec, RelaxationCost, constant_from_quantile,
                          epsilon_grid, exponential_fit)
from .errors import (ConfigError, BadDims, DataError, MissingErmTrace,
                     ReportMismatch, ShapecastError)


def _exit_code(exc):
    if isinstance(exc, (ConfigError, BadDims)):
        return 2
    if isinstance(exc, (DataError, MissingErmTrace, ReportMismatch)):
        return 3
    return 4


def _fail(exc, out_dir=None):
    """Machine-readable error record plus a stderr line; returns exit code."""
    record = (f"kind = error\n"
              f"error = {type(exc).__name__}\n"
              f"message = {exc}\n")
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.txt"), "w",
                      encoding="utf-8") as fh:
                fh.write(record)
        except OSError:
            pass
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return _exit_code(exc)


def _load_dataset(rc):
    if rc["data.source"] == "csv":
        ts_col = rc["data.timestamp_column"] or None
        if ts_col is not None and ts_col.lstrip("-").isdigit():
            ts_col = int(ts_col)
        return data.load_csv(rc["data.path"], has_header=rc["data.has_header"],
                             timestamp_column=ts_col)
    return data.synth_heteroscedastic(rc["data.length"], rc["data.channels"],
                                      rc["data.noise_growth"], rc["data.seed"])


def _prepare(rc):
    """Dataset -> (SplitWindows, NormStats, PredictorDims)."""
    ds = _load_dataset(rc)
    wcfg = data.WindowConfig(rc["window.context_len"], rc["window.pred_len"])
    split = data.SplitSpec(rc["split.train"], rc["split.val"], rc["split.test"])
    target = rc["data.target_channel"] or None
    windows, stats = data.prepare_windows(ds, wcfg, split, target,
                                          rc["data.normalize"])
    n_ch = ds.values.shape[1]
    dims = predictors.PredictorDims(
        context_len=wcfg.context_len, pred_len=wcfg.pred_len,
        in_channels=n_ch,
        target_channels=1 if target is not None else n_ch,
        hidden=rc["model.hidden"])
    return windows, stats, dims


def _reference_errors(erm_dir, windows, which):
    """Per-step train or val errors of a finished reference run.

    erm_dir must hold a checkpoint.txt from a prior `shapecast train`; the
    errors are recomputed on this config's windows so the reference model
    and the current run see identical data.
    """
    if not erm_dir or not os.path.isdir(erm_dir):
        raise MissingErmTrace(f"no reference run directory: {erm_dir!r}")
    ckpt = os.path.join(erm_dir, "checkpoint.txt")
    if not os.path.isfile(ckpt):
        raise MissingErmTrace(f"no checkpoint.txt under {erm_dir!r}")
    params = predictors.load_checkpoint(ckpt)
    batch = windows.train if which == "train" else windows.val
    return predictors.step_losses(params, batch)


def _build_spec(rc, windows):
    """ConstraintSpec + RelaxationCost for a single training run."""
    mode = rc["train.mode"]
    if mode == "erm":
        return None, None
    if mode == "monotonic":
        return ConstraintSpec("monotonic"), None
    source = rc["constraint.source"]
    relaxation = (RelaxationCost(rc["constraint.alpha"])
                  if mode in ("resilient", "resilient_dualreg") else None)
    if source == "explicit":
        eps = np.array(rc["constraint.epsilon"], dtype=np.float64)
        # ConstraintSpec admits two epsilon shapes: a flat level or a
        # positive non-decreasing profile. Anything else is a config error.
        if np.all(eps == eps[0]):
            mode_name = "constant"
        elif np.all(eps > 0) and np.all(np.diff(eps) >= 0):
            mode_name = "exponential"
        else:
            raise ConfigError(
                "constraint.epsilon",
                "explicit epsilon must be a flat level or a positive "
                "non-decreasing profile")
        return ConstraintSpec(mode_name, eps, label="explicit"), relaxation
    erm_dir = rc["constraint.erm_dir"] or rc["grid.erm_dir"]
    errors = _reference_errors(erm_dir, windows, rc["constraint.split"])
    if source == "quantile":
        label = f"{rc['constraint.split']}_q{int(round(rc['constraint.q'] * 100))}"
        return constant_from_quantile(errors, rc["constraint.q"], label), relaxation
    return exponential_fit(errors, label=f"{rc['constraint.split']}_exp"), relaxation


def _write_run_artifacts(out_dir, rc, trace, report, spec=None):
    os.makedirs(out_dir, exist_ok=True)
    join = lambda name: os.path.join(out_dir, name)
    with open(join("config_resolved.txt"), "w", encoding="utf-8") as fh:
        fh.write(rc.resolved_text())
    predictors.save_checkpoint(trace.params, join("checkpoint.txt"))
    trainer.save_trace(trace, join("trace.txt"))
    evaluation.save_report(report, join("report.txt"))
    evaluation.save_per_step_csv(report, join("per_step.csv"))
    evaluation.save_summary_csv(report, join("summary.csv"))


def cmd_train(rc, out_dir):
    windows, _, dims = _prepare(rc)
    spec, relaxation = _build_spec(rc, windows)
    cfg = rc.train_config()
    params0 = predictors.init_params(rc["model.arch"], dims, cfg.seed)
    trace = trainer.train(windows, params0, cfg, spec, relaxation)
    report = evaluation.evaluate(
        trace.params, windows.test, mode=cfg.mode, dataset=rc.dataset_tag(),
        fingerprint=rc.fingerprint(), spec=spec,
        zeta=trace.final_zeta if spec is not None else None)
    _write_run_artifacts(out_dir, rc, trace, report, spec)
    print(f"run complete: mode={cfg.mode} mean_mse={report.mean_mse!r} "
          f"window_std={report.window_std!r}")
    return 0


def cmd_grid(rc, out_dir):
    if rc["train.mode"] == "erm":
        raise ConfigError("train.mode", "grid needs a constrained mode")
    if rc["train.mode"] == "monotonic":
        raise ConfigError("train.mode", "grid searches epsilon; monotonic has none")
    windows, _, dims = _prepare(rc)
    erm_dir = rc["grid.erm_dir"] or rc["constraint.erm_dir"]
    train_err = _reference_errors(erm_dir, windows, "train")
    val_err = _reference_errors(erm_dir, windows, "val")
    specs = epsilon_grid(train_err, val_err)
    cfg = rc.train_config()
    relaxation = (RelaxationCost(rc["constraint.alpha"])
                  if cfg.mode in ("resilient", "resilient_dualreg") else None)
    result = evaluation.grid_search(windows, rc["model.arch"], dims, cfg, specs,
                                    relaxation, dataset=rc.dataset_tag(),
                                    fingerprint=rc.fingerprint())

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config_resolved.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(rc.resolved_text())
    for entry in result.entries:
        cand_dir = os.path.join(out_dir, f"cand_{entry.spec.label}")
        os.makedirs(cand_dir, exist_ok=True)
        predictors.save_checkpoint(entry.trace.params,
                                   os.path.join(cand_dir, "checkpoint.txt"))
        trainer.save_trace(entry.trace, os.path.join(cand_dir, "trace.txt"))
        evaluation.save_report(entry.report, os.path.join(cand_dir, "report.txt"))
        evaluation.save_per_step_csv(entry.report,
                                     os.path.join(cand_dir, "per_step.csv"))
    best = result.best
    lines = [
        "kind = grid_best",
        f"label = {best.spec.label}",
        f"val_mean_mse = {best.val_mean_mse!r}",
        f"test_mean_mse = {best.report.mean_mse!r}",
        f"test_window_std = {best.report.window_std!r}",
        f"fingerprint = {rc.fingerprint()}",
        f"candidates = {len(result.entries)}",
        f"failures = {len(result.failures)}",
    ]
    lines += [f"failed.{label} = {msg}" for label, msg in result.failures]
    with open(os.path.join(out_dir, "best.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"grid complete: best={best.spec.label} "
          f"val_mean_mse={best.val_mean_mse!r}")
    return 0


def cmd_compare(baseline_path, candidate_path, out_dir):
    baseline = evaluation.load_report(baseline_path)
    candidate = evaluation.load_report(candidate_path)
    cmp = evaluation.compare(baseline, candidate)
    os.makedirs(out_dir, exist_ok=True)
    evaluation.save_comparison(cmp, os.path.join(out_dir, "comparison.txt"))
    evaluation.save_merged_csv(cmp, os.path.join(out_dir, "merged.csv"))
    print(f"compare complete: mean_mse {cmp.pct_mean_mse:+.4f}% "
          f"window_std {cmp.pct_window_std:+.4f}%")
    return 0


def _parser():
    parser = argparse.ArgumentParser(
        prog="shapecast",
        description="Multi-step forecasters with per-step loss shaping.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("train", "run one training job from a config"),
                            ("grid", "train six epsilon candidates, pick by "
                                     "validation MSE")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config")
        p.add_argument("--out", default=None,
                       help="output directory (default: alongside the config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override train.seed from the config")

    p = sub.add_parser("compare", help="percent changes of one report vs another")
    p.add_argument("baseline", help="baseline report.txt")
    p.add_argument("candidate", help="candidate report.txt")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "compare":
        try:
            return cmd_compare(args.baseline, args.candidate, args.out)
        except ShapecastError as exc:
            return _fail(exc, args.out)

    out_dir = args.out
    try:
        overrides = {}
        if args.seed is not None:
            overrides["train.seed"] = args.seed
        rc = RunConfig.from_file(args.config, overrides)
        if out_dir is None:
            out_dir = os.path.join(os.path.dirname(os.path.abspath(args.config)),
                                   f"run_{rc.fingerprint()}")
        if args.command == "train":
            return cmd_train(rc, out_dir)
        return cmd_grid(rc, out_dir)
    except ShapecastError as exc:
        return _fail(exc, out_dir)


if __name__ == "__main__":
    sys.exit(main())
