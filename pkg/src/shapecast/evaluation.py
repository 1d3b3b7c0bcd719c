"""Per-step test metrics, comparisons, rank statistics, and the epsilon grid
search.

Window STD is the population standard deviation of the per-step MSE vector:
it measures how unevenly the error is distributed across the prediction
window, and is the quantity loss shaping trades against mean MSE.
"""

from dataclasses import dataclass

import numpy as np

from . import predictors
from .constraints import constraint_slacks
from .errors import (
    AllCandidatesFailed, DegenerateVariance, DimMismatch, EmptyTestSet,
    MissingFile, ParseError, ReportMismatch, ShapecastError, TooShort,
    ZeroBaseline,
)
from .trainer import train


@dataclass
class EvalReport:
    mode: str
    dataset: str
    pred_len: int
    per_step_mse: np.ndarray
    mean_mse: float
    window_std: float
    fingerprint: str = ""
    max_violation: float = float("nan")

    @classmethod
    def build(cls, mode, dataset, per_step_mse, fingerprint="",
              max_violation=float("nan")):
        v = np.asarray(per_step_mse, dtype=np.float64).reshape(-1)
        return cls(mode=mode, dataset=dataset, pred_len=v.size,
                   per_step_mse=v, mean_mse=float(np.mean(v)),
                   window_std=float(np.std(v)), fingerprint=fingerprint,
                   max_violation=max_violation)


@dataclass
class ComparisonReport:
    baseline_mode: str
    candidate_mode: str
    pred_len: int
    pct_mean_mse: float
    pct_window_std: float
    per_step_pct: np.ndarray
    baseline_per_step: np.ndarray
    candidate_per_step: np.ndarray


def evaluate(params, test_windows, mode="", dataset="", fingerprint="",
             spec=None, zeta=None):
    """Per-step MSE of the final model over every test window."""
    if test_windows is None or test_windows.count == 0:
        raise EmptyTestSet("no test windows to evaluate")
    mse = predictors.step_losses(params, test_windows)
    max_violation = float("nan")
    if spec is not None:
        max_violation = float(np.max(constraint_slacks(mse, spec, zeta)))
    return EvalReport.build(mode, dataset, mse, fingerprint, max_violation)


def compare(baseline, candidate):
    """Percent changes of the candidate against the baseline report."""
    if baseline.pred_len != candidate.pred_len:
        raise ReportMismatch(
            f"pred_len {baseline.pred_len} vs {candidate.pred_len}")
    if baseline.dataset and candidate.dataset and \
            baseline.dataset != candidate.dataset:
        raise ReportMismatch(
            f"dataset {baseline.dataset!r} vs {candidate.dataset!r}")
    if baseline.mean_mse == 0.0 or baseline.window_std == 0.0:
        raise ZeroBaseline("baseline mean MSE and Window STD must be nonzero")
    if np.any(baseline.per_step_mse == 0.0):
        raise ZeroBaseline("baseline has a zero per-step MSE entry")
    pct = lambda c, b: 100.0 * (c - b) / b
    return ComparisonReport(
        baseline_mode=baseline.mode,
        candidate_mode=candidate.mode,
        pred_len=baseline.pred_len,
        pct_mean_mse=pct(candidate.mean_mse, baseline.mean_mse),
        pct_window_std=pct(candidate.window_std, baseline.window_std),
        per_step_pct=pct(candidate.per_step_mse, baseline.per_step_mse),
        baseline_per_step=baseline.per_step_mse.copy(),
        candidate_per_step=candidate.per_step_mse.copy(),
    )


# --- rank statistics ---------------------------------------------------------

def _ranks(x):
    """Ranks 1..n with ties sharing their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    na, nb = float(np.sqrt(a @ a)), float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVariance("correlation undefined for a constant vector")
    return float((a @ b) / (na * nb))


def spearman_train_test(train_errors, test_errors):
    """Spearman rank correlation (average ranks for ties) between two
    per-step error vectors. Returns None when either vector is constant:
    ranks carry no information there, so the statistic is undefined rather
    than zero."""
    a = np.asarray(train_errors, dtype=np.float64).reshape(-1)
    b = np.asarray(test_errors, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise DimMismatch(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise TooShort("need at least two steps")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return None
    return _pearson(_ranks(a), _ranks(b))


def pearson_across_lengths(errors_a, errors_b):
    """Pearson correlation between per-step error profiles of different
    prediction lengths: the shorter profile is resampled to the longer one
    by endpoint-aligned linear interpolation."""
    a = np.asarray(errors_a, dtype=np.float64).reshape(-1)
    b = np.asarray(errors_b, dtype=np.float64).reshape(-1)
    if a.size < 2 or b.size < 2:
        raise TooShort("need at least two steps per profile")
    if a.size < b.size:
        a = resample_profile(a, b.size)
    elif b.size < a.size:
        b = resample_profile(b, a.size)
    return _pearson(a, b)


def resample_profile(v, n):
    """Endpoint-aligned linear interpolation of a profile onto n points."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size < 2:
        raise TooShort("cannot resample fewer than two points")
    return np.interp(np.linspace(0.0, 1.0, n),
                     np.linspace(0.0, 1.0, v.size), v)


# --- epsilon grid search -------------------------------------------------------

@dataclass
class GridEntry:
    spec: object
    trace: object
    val_mean_mse: float
    report: EvalReport


@dataclass
class GridResult:
    entries: list
    failures: list
    best_index: int

    @property
    def best(self):
        return self.entries[self.best_index]


def grid_search(windows, arch, dims, cfg, candidate_specs, relaxation=None,
                dataset="", fingerprint=""):
    """Train one run per candidate spec (same seed for all), score each on
    validation mean MSE, and return the argmin; ties go to the smallest
    mean epsilon. Per-candidate failures are collected, not fatal, unless
    every candidate fails."""
    entries = []
    failures = []
    for spec in candidate_specs:
        label = spec.label or spec.mode
        try:
            params0 = predictors.init_params(arch, dims, cfg.seed)
            trace = train(windows, params0, cfg, spec, relaxation)
            val_losses = predictors.step_losses(trace.params, windows.val)
            report = evaluate(trace.params, windows.test,
                              mode=f"{cfg.mode}:{label}", dataset=dataset,
                              fingerprint=fingerprint, spec=spec)
            entries.append(GridEntry(spec, trace, float(np.mean(val_losses)),
                                     report))
        except ShapecastError as exc:
            failures.append((label, repr(exc)))
    if not entries:
        raise AllCandidatesFailed(failures)
    best_val = min(e.val_mean_mse for e in entries)
    tied = [i for i, e in enumerate(entries) if e.val_mean_mse == best_val]
    best_index = min(
        tied,
        key=lambda i: (float(np.mean(entries[i].spec.epsilon))
                       if entries[i].spec.epsilon.size else 0.0))
    return GridResult(entries=entries, failures=failures, best_index=best_index)


# --- report I/O ----------------------------------------------------------------

def _fmt_vec(v):
    return ",".join(repr(float(x)) for x in v)


def _parse_vec(text):
    text = text.strip()
    if not text:
        return np.zeros(0)
    return np.array([float(tok) for tok in text.split(",")])


def save_report(report, path):
    with open(path, "w") as fh:
        fh.write("kind = eval_report\n")
        fh.write(f"mode = {report.mode}\n")
        fh.write(f"dataset = {report.dataset}\n")
        fh.write(f"pred_len = {report.pred_len}\n")
        fh.write(f"fingerprint = {report.fingerprint}\n")
        fh.write(f"mean_mse = {repr(float(report.mean_mse))}\n")
        fh.write(f"window_std = {repr(float(report.window_std))}\n")
        fh.write(f"max_violation = {repr(float(report.max_violation))}\n")
        fh.write(f"per_step_mse = {_fmt_vec(report.per_step_mse)}\n")


def load_report(path):
    import os
    if not os.path.isfile(path):
        raise MissingFile(f"no such report: {path}")
    rec = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ParseError(path, lineno, 1, f"expected key = value: {line!r}")
            rec[key.strip()] = val.strip()
    try:
        if rec.get("kind") != "eval_report":
            raise ParseError(path, 1, 1, "not an eval_report file")
        per_step = _parse_vec(rec["per_step_mse"])
        report = EvalReport(
            mode=rec["mode"], dataset=rec["dataset"],
            pred_len=int(rec["pred_len"]), per_step_mse=per_step,
            mean_mse=float(rec["mean_mse"]),
            window_std=float(rec["window_std"]),
            fingerprint=rec["fingerprint"],
            max_violation=float(rec["max_violation"]))
    except KeyError as exc:
        raise ParseError(path, 1, 1, f"missing field {exc}") from None
    if report.pred_len != per_step.size:
        raise ParseError(path, 1, 1, "pred_len disagrees with per_step_mse")
    return report


def save_per_step_csv(report, path):
    with open(path, "w") as fh:
        fh.write("step,mse\n")
        for i, x in enumerate(report.per_step_mse, start=1):
            fh.write(f"{i},{repr(float(x))}\n")


def save_summary_csv(report, path):
    with open(path, "w") as fh:
        fh.write("mode,dataset,pred_len,mean_mse,window_std\n")
        fh.write(f"{report.mode},{report.dataset},{report.pred_len},"
                 f"{repr(float(report.mean_mse))},"
                 f"{repr(float(report.window_std))}\n")


def save_comparison(cmp, path):
    with open(path, "w") as fh:
        fh.write("kind = comparison\n")
        fh.write(f"baseline_mode = {cmp.baseline_mode}\n")
        fh.write(f"candidate_mode = {cmp.candidate_mode}\n")
        fh.write(f"pred_len = {cmp.pred_len}\n")
        fh.write(f"pct_mean_mse = {repr(float(cmp.pct_mean_mse))}\n")
        fh.write(f"pct_window_std = {repr(float(cmp.pct_window_std))}\n")
        fh.write(f"per_step_pct = {_fmt_vec(cmp.per_step_pct)}\n")


def save_merged_csv(cmp, path):
    with open(path, "w") as fh:
        fh.write("step,mse_baseline,mse_candidate\n")
        for i in range(cmp.pred_len):
            fh.write(f"{i + 1},{repr(float(cmp.baseline_per_step[i]))},"
                     f"{repr(float(cmp.candidate_per_step[i]))}\n")
