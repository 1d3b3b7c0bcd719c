"""Per-step loss bounds and their relaxation cost.

A ConstraintSpec either bounds each step's expected loss by an epsilon
vector (constant or exponential-in-step profiles) or, in monotonic mode,
orders adjacent steps (loss at step i must not exceed loss at step i+1,
giving pred_len - 1 constraints and an empty epsilon).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch, EmptyErrors, NonPositiveErrors, QOutOfRange, TooShort,
)

MODE_CONSTANT = "constant"
MODE_EXPONENTIAL = "exponential"
MODE_MONOTONIC = "monotonic"
CONSTRAINT_MODES = (MODE_CONSTANT, MODE_EXPONENTIAL, MODE_MONOTONIC)


@dataclass
class ConstraintSpec:
    mode: str
    epsilon: np.ndarray = field(default_factory=lambda: np.zeros(0))
    label: str = ""

    def __post_init__(self):
        if self.mode not in CONSTRAINT_MODES:
            raise DimMismatch(f"unknown constraint mode {self.mode!r}")
        self.epsilon = np.asarray(self.epsilon, dtype=np.float64).reshape(-1)
        if self.mode == MODE_MONOTONIC:
            if self.epsilon.size != 0:
                raise DimMismatch("monotonic constraints take no epsilon")
        else:
            if self.epsilon.size == 0:
                raise EmptyErrors("epsilon must be non-empty")
            if np.any(self.epsilon < 0) or not np.all(np.isfinite(self.epsilon)):
                raise DimMismatch("epsilon must be finite and >= 0")
            if self.mode == MODE_CONSTANT and np.any(self.epsilon != self.epsilon[0]):
                raise DimMismatch("constant mode needs all-equal epsilon")
            if self.mode == MODE_EXPONENTIAL and (
                    np.any(self.epsilon <= 0) or np.any(np.diff(self.epsilon) < 0)):
                raise DimMismatch(
                    "exponential mode needs positive non-decreasing epsilon")

    def n_constraints(self, pred_len):
        return pred_len - 1 if self.mode == MODE_MONOTONIC else pred_len


@dataclass
class RelaxationCost:
    """Quadratic slack cost h(zeta) = (alpha/2) * ||zeta||^2."""

    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DimMismatch(f"alpha must be finite and > 0, got {self.alpha}")

    def value(self, zeta):
        zeta = np.asarray(zeta, dtype=np.float64)
        return 0.5 * self.alpha * float(zeta @ zeta)

    def grad(self, zeta):
        return self.alpha * np.asarray(zeta, dtype=np.float64)


def _check_errors_vec(errors):
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    if errors.size == 0:
        raise EmptyErrors("need at least one per-step error")
    if not np.all(np.isfinite(errors)):
        raise EmptyErrors("per-step errors must be finite")
    return errors


def constant_from_quantile(errors, q, label=""):
    """Constant bound: the linear-interpolation q-quantile of the per-step
    error vector, replicated to every step."""
    errors = _check_errors_vec(errors)
    if not (0.0 <= q <= 1.0):
        raise QOutOfRange(f"quantile must lie in [0, 1], got {q}")
    eps = float(np.quantile(errors, q))
    return ConstraintSpec(MODE_CONSTANT, np.full(errors.size, eps), label)


def epsilon_grid(train_errors, val_errors):
    """The six candidate bounds: {25, 50, 75}th percentiles of the ERM
    model's per-step errors on the train and validation splits."""
    out = []
    for split_name, errors in (("train", train_errors), ("val", val_errors)):
        for q in (0.25, 0.5, 0.75):
            label = f"{split_name}_q{int(round(q * 100))}"
            out.append(constant_from_quantile(errors, q, label))
    return out


def exponential_fit(errors, label=""):
    """Least-squares fit of log(err_i) = a + b*i over steps i = 1..pred_len,
    giving bounds eps_i = exp(a + b*i). A decreasing fit (b < 0) is clamped
    to the constant exp(mean of logs)."""
    errors = _check_errors_vec(errors)
    if np.any(errors <= 0):
        raise NonPositiveErrors("exponential fit needs strictly positive errors")
    n = errors.size
    if n < 2:
        raise TooShort("exponential fit needs at least two steps")
    i = np.arange(1, n + 1, dtype=np.float64)
    logs = np.log(errors)
    b, a = np.polyfit(i, logs, 1)
    if b < 0:
        b, a = 0.0, float(np.mean(logs))
    eps = np.exp(a + b * i)
    return ConstraintSpec(MODE_EXPONENTIAL, eps, label)


def constraint_slacks(losses, spec, zeta=None):
    """Signed constraint gaps at the given per-step losses.

    Epsilon modes: s_i = loss_i - (eps_i + zeta_i), one per step.
    Monotonic: s_i = loss_i - loss_{i+1}, one per adjacent pair.
    Positive entries are violations.
    """
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    n = spec.n_constraints(losses.size)
    if zeta is None:
        zeta = np.zeros(n)
    else:
        zeta = np.asarray(zeta, dtype=np.float64).reshape(-1)
        if zeta.shape[0] != n:
            raise DimMismatch(f"{zeta.shape[0]} slacks for {n} constraints")
    if spec.mode == MODE_MONOTONIC:
        if losses.size < 2:
            raise DimMismatch("monotonic constraints need pred_len >= 2")
        return losses[:-1] - losses[1:] - zeta
    if spec.epsilon.shape[0] != losses.size:
        raise DimMismatch(
            f"{spec.epsilon.shape[0]} bounds for {losses.size} steps")
    return losses - (spec.epsilon + zeta)


# --- text record embedding (run configs, fixture files) ---------------------

def spec_to_record(spec, cost=None):
    """Flat key/value lines describing a spec (and optional alpha)."""
    rec = {"constraint.mode": spec.mode}
    if spec.label:
        rec["constraint.label"] = spec.label
    if spec.mode != MODE_MONOTONIC:
        rec["constraint.epsilon"] = ",".join(repr(float(e)) for e in spec.epsilon)
    if cost is not None:
        rec["constraint.alpha"] = repr(float(cost.alpha))
    return rec


def spec_from_record(rec):
    mode = rec.get("constraint.mode", "").strip()
    label = rec.get("constraint.label", "").strip()
    if mode == MODE_MONOTONIC:
        spec = ConstraintSpec(MODE_MONOTONIC, np.zeros(0), label)
    else:
        eps_text = rec.get("constraint.epsilon", "").strip()
        if not eps_text:
            raise EmptyErrors("record has no constraint.epsilon")
        eps = np.array([float(tok) for tok in eps_text.split(",")])
        spec = ConstraintSpec(mode, eps, label)
    cost = None
    if "constraint.alpha" in rec:
        cost = RelaxationCost(float(rec["constraint.alpha"]))
    return spec, cost
