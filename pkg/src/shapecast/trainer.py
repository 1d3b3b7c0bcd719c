"""Minibatch primal-dual training with per-step loss shaping.

One update cycle per minibatch, in this order:

  1. primal step: one optimizer step on sum_i w_i * loss_i, where the
     weights come from the mode (see step_weights);
  2. constraint evaluation: per-step losses recomputed on the same batch
     with the updated parameters, turned into signed slacks;
  3. slack step (resilient mode only): zeta <- [zeta - eta_z*(alpha*zeta - lambda)]+
     using the pre-update slacks' lambda;
  4. dual step: lambda <- [lambda + eta_d * s]+ (the dual-regularized mode
     uses s - lambda/alpha instead).

dual_eval="full" moves steps 2-4 to the end of each epoch, evaluated on
the whole training split. ERM skips 2-4 entirely; with a spec supplied it
still records full-split slack diagnostics per epoch, which never touch
the parameters. Same config and seed give bit-identical traces (for a
fixed kernel backend).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import predictors
from .constraints import (
    ConstraintSpec, MODE_MONOTONIC, RelaxationCost, constraint_slacks,
)
from .errors import ConfigError, MissingFile, ParseError

MODE_ERM = "erm"
MODE_CONSTRAINED = "constrained"
MODE_RESILIENT = "resilient"
MODE_RESILIENT_DUALREG = "resilient_dualreg"
MODE_MONOTONIC_TRAIN = "monotonic"
TRAIN_MODES = (MODE_ERM, MODE_CONSTRAINED, MODE_RESILIENT,
               MODE_RESILIENT_DUALREG, MODE_MONOTONIC_TRAIN)

OPT_SGD = "sgd"
OPT_ADAM = "adam"


@dataclass
class TrainConfig:
    mode: str = MODE_ERM
    primal_lr: float = 1e-3
    dual_lr: float = 0.01
    slack_lr: float = 0.01
    epochs: int = 10
    batch_size: int = 64
    dual_init: float = 1.0
    optimizer: str = OPT_ADAM
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stopping: bool = True   # honored by ERM only; constrained modes force it off
    patience: int = 3
    seed: int = 0
    dual_eval: str = "batch"      # "batch" or "full"
    freeze_duals: bool = False    # diagnostic: never update lambda or zeta

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigError("train.mode", f"unknown mode {self.mode!r}")
        if self.optimizer not in (OPT_SGD, OPT_ADAM):
            raise ConfigError("train.optimizer", f"unknown {self.optimizer!r}")
        if self.dual_eval not in ("batch", "full"):
            raise ConfigError("train.dual_eval", f"unknown {self.dual_eval!r}")
        for name in ("primal_lr", "dual_lr", "slack_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"train.{name}", "must be > 0")
        if self.epochs < 1:
            raise ConfigError("train.epochs", "must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size", "must be >= 1")
        if self.dual_init < 0:
            raise ConfigError("train.dual_init", "must be >= 0")
        if self.patience < 1:
            raise ConfigError("train.patience", "must be >= 1")


@dataclass
class DualState:
    lam: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(-1)
        self.zeta = np.asarray(self.zeta, dtype=np.float64).reshape(-1)
        if np.any(self.lam < 0) or np.any(self.zeta < 0):
            raise ConfigError("dual_state", "multipliers and slacks must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    step_losses: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    max_violation: float


@dataclass
class TrainTrace:
    mode: str
    pred_len: int
    records: list = field(default_factory=list)
    params: predictors.PredictorParams = None

    @property
    def final_lam(self):
        return self.records[-1].lam

    @property
    def final_zeta(self):
        return self.records[-1].zeta


# --- update rules ------------------------------------------------------------

def step_weights(mode, pred_len, lam):
    """Per-step gradient weights for the primal update.

    ERM: uniform 1/pred_len. Epsilon-constrained modes: lambda_i + 1/pred_len.
    Monotonic: the telescoped 1/pred_len + lambda_i - lambda_{i-1} with
    lambda_0 = lambda_{pred_len} = 0; entries may be negative but the total
    weight is preserved.
    """
    base = 1.0 / pred_len
    if mode == MODE_ERM:
        return np.full(pred_len, base)
    if mode == MODE_MONOTONIC_TRAIN:
        if lam.shape[0] != pred_len - 1:
            raise ConfigError("dual_state", f"monotonic needs {pred_len - 1} duals")
        ext = np.concatenate([[0.0], lam, [0.0]])
        w = base + (ext[1:] - ext[:-1])
        tol = 1e-9 * max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
        assert abs(float(np.sum(w)) - 1.0) <= tol, "telescoped weights lost mass"
        return w
    if lam.shape[0] != pred_len:
        raise ConfigError("dual_state", f"need {pred_len} duals, got {lam.shape[0]}")
    return lam + base


def slack_step(zeta, lam, cost, slack_lr):
    """zeta <- [zeta - slack_lr * (grad h(zeta) - lambda)]+"""
    return np.maximum(0.0, zeta - slack_lr * (cost.grad(zeta) - lam))


def dual_step(lam, slacks, dual_lr):
    """lambda <- [lambda + dual_lr * slacks]+"""
    return np.maximum(0.0, lam + dual_lr * slacks)


def dualreg_dual_step(lam, slacks, dual_lr, alpha):
    """Dual-regularized ascent: lambda <- [lambda + dual_lr*(s - lambda/alpha)]+.

    The quadratic slack cost enters through its conjugate, so no explicit
    zeta is kept; lambda/alpha plays the role of the slack.
    """
    return np.maximum(0.0, lam + dual_lr * (slacks - lam / alpha))


# --- optimizers --------------------------------------------------------------

class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, grad):
        theta -= self.lr * grad


class _Adam:
    def __init__(self, lr, beta1, beta2, eps, n):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        mhat = self.m / (1.0 - self.b1 ** self.t)
        vhat = self.v / (1.0 - self.b2 ** self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _make_optimizer(cfg, n):
    if cfg.optimizer == OPT_SGD:
        return _Sgd(cfg.primal_lr)
    return _Adam(cfg.primal_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, n)


# --- training loop -----------------------------------------------------------

def _slice_batch(windows, idx):
    from .data import WindowBatch
    return WindowBatch(windows.contexts[idx], windows.targets[idx])


def _mean_loss(step_losses):
    return float(np.mean(step_losses))


def train(windows, params0, cfg, spec=None, relaxation=None):
    """Run cfg.epochs of minibatch training; returns the trace.

    windows: a data.SplitWindows (train required; val needed only for ERM
    early stopping). spec: the ConstraintSpec for constrained modes, or an
    optional diagnostics spec for ERM. relaxation: RelaxationCost for the
    resilient modes (defaults to alpha = 1).

    Early stopping (ERM only): stops after cfg.patience epochs without
    validation improvement and restores the best-validation parameters.
    """
    mode = cfg.mode
    tp = params0.dims.pred_len
    needs_spec = mode not in (MODE_ERM,)
    if mode == MODE_MONOTONIC_TRAIN:
        if spec is None:
            spec = ConstraintSpec(MODE_MONOTONIC)
        elif spec.mode != MODE_MONOTONIC:
            raise ConfigError("constraint", "monotonic mode needs a monotonic spec")
    elif needs_spec:
        if spec is None:
            raise ConfigError("constraint", f"mode {mode!r} needs a constraint spec")
        if spec.mode == MODE_MONOTONIC:
            raise ConfigError("constraint",
                              "monotonic spec requires train.mode = monotonic")
    if relaxation is None:
        relaxation = RelaxationCost(1.0)

    n_duals = spec.n_constraints(tp) if spec is not None else tp
    lam = np.full(n_duals, float(cfg.dual_init)) if needs_spec else np.zeros(n_duals)
    zeta = np.zeros(n_duals)

    params = params0.copy()
    opt = _make_optimizer(cfg, params.theta.shape[0])
    rng = np.random.default_rng(cfg.seed)
    n = windows.train.count
    use_es = (mode == MODE_ERM) and cfg.early_stopping
    if use_es and windows.val is None:
        raise ConfigError("train.early_stopping", "needs validation windows")

    trace = TrainTrace(mode=mode, pred_len=tp)
    best_val = math.inf
    best_params = None
    bad_epochs = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        acc_losses = np.zeros(tp)
        seen = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = _slice_batch(windows.train, idx)
            w = step_weights(mode, tp, lam)
            _, losses, grad = predictors.weighted_loss_grad(params, batch, w)
            opt.step(params.theta, grad)
            acc_losses += losses * idx.shape[0]
            seen += idx.shape[0]
            if needs_spec and cfg.dual_eval == "batch" and not cfg.freeze_duals:
                post = predictors.step_losses(params, batch)
                zeta_arg = zeta if mode == MODE_RESILIENT else None
                s = constraint_slacks(post, spec, zeta_arg)
                if mode == MODE_RESILIENT:
                    zeta = slack_step(zeta, lam, relaxation, cfg.slack_lr)
                if mode == MODE_RESILIENT_DUALREG:
                    lam = dualreg_dual_step(lam, s, cfg.dual_lr, relaxation.alpha)
                else:
                    lam = dual_step(lam, s, cfg.dual_lr)

        max_violation = float("nan")
        if spec is not None:
            full = predictors.step_losses(params, windows.train)
            zeta_arg = zeta if mode == MODE_RESILIENT else None
            s_full = constraint_slacks(full, spec, zeta_arg)
            max_violation = float(np.max(s_full))
            if needs_spec and cfg.dual_eval == "full" and not cfg.freeze_duals:
                if mode == MODE_RESILIENT:
                    zeta = slack_step(zeta, lam, relaxation, cfg.slack_lr)
                if mode == MODE_RESILIENT_DUALREG:
                    lam = dualreg_dual_step(lam, s_full, cfg.dual_lr,
                                            relaxation.alpha)
                else:
                    lam = dual_step(lam, s_full, cfg.dual_lr)

        zeta_report = (lam / relaxation.alpha
                       if mode == MODE_RESILIENT_DUALREG else zeta)
        step_mean = acc_losses / seen
        trace.records.append(EpochRecord(
            epoch=epoch,
            mean_loss=_mean_loss(step_mean),
            step_losses=step_mean,
            lam=lam.copy(),
            zeta=zeta_report.copy(),
            max_violation=max_violation,
        ))

        if use_es:
            val_losses = predictors.step_losses(params, windows.val)
            val_mean = _mean_loss(val_losses)
            if val_mean < best_val:
                best_val = val_mean
                best_params = params.copy()
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= cfg.patience:
                    break

    if use_es and best_params is not None:
        params = best_params
    trace.params = params
    return trace


def train_dualreg(windows, params0, cfg, spec, relaxation=None):
    """The dual-regularized resilient variant (no explicit slack iterate)."""
    if cfg.mode != MODE_RESILIENT_DUALREG:
        cfg = replace(cfg, mode=MODE_RESILIENT_DUALREG)
    return train(windows, params0, cfg, spec, relaxation)


# --- trace I/O ---------------------------------------------------------------

def _fmt_vec(v):
    return ",".join(repr(float(x)) for x in v)


def _parse_vec(text):
    text = text.strip()
    if not text:
        return np.zeros(0)
    return np.array([float(tok) for tok in text.split(",")])


def save_trace(trace, path):
    """Line-oriented epoch records; the final params go in a checkpoint."""
    with open(path, "w") as fh:
        fh.write(f"mode = {trace.mode}\n")
        fh.write(f"pred_len = {trace.pred_len}\n")
        fh.write(f"epochs = {len(trace.records)}\n")
        for r in trace.records:
            fh.write(f"epoch = {r.epoch}\n")
            fh.write(f"mean_loss = {repr(float(r.mean_loss))}\n")
            fh.write(f"step_losses = {_fmt_vec(r.step_losses)}\n")
            fh.write(f"lambda = {_fmt_vec(r.lam)}\n")
            fh.write(f"zeta = {_fmt_vec(r.zeta)}\n")
            fh.write(f"max_violation = {repr(float(r.max_violation))}\n")


def load_trace(path):
    import os
    if not os.path.isfile(path):
        raise MissingFile(f"no such trace: {path}")
    header = {}
    records = []
    cur = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ParseError(path, lineno, 1, f"expected key = value, got {line!r}")
            key, val = key.strip(), val.strip()
            if key == "epoch":
                if cur is not None:
                    records.append(cur)
                cur = {"epoch": int(val)}
            elif cur is None:
                header[key] = val
            else:
                cur[key] = val
    if cur is not None:
        records.append(cur)
    try:
        trace = TrainTrace(mode=header["mode"], pred_len=int(header["pred_len"]))
        for rec in records:
            trace.records.append(EpochRecord(
                epoch=rec["epoch"],
                mean_loss=float(rec["mean_loss"]),
                step_losses=_parse_vec(rec["step_losses"]),
                lam=_parse_vec(rec["lambda"]),
                zeta=_parse_vec(rec["zeta"]),
                max_violation=float(rec["max_violation"]),
            ))
    except KeyError as exc:
        raise ParseError(path, 1, 1, f"missing field {exc}") from None
    return trace
