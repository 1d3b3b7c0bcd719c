"""Independent solver for tiny convex instances of the constrained problem.

With a linear predictor and squared error, each per-step loss is a convex
quadratic in the flat parameter vector, so the loss-shaped problem is a
small QCQP. This module solves such instances by projected dual ascent
with an exact inner minimization (the Lagrangian minimizer is a linear
solve), diminishing dual steps, and tail averaging of the dual iterates,
then certifies the result through KKT residuals. It exists to validate
the minibatch trainer and shares none of its update code.

Instances use the same flat parameter layout as the predictors module, so
trainer parameters can be plugged into instance quadratics directly.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .constraints import (
    ConstraintSpec, MODE_MONOTONIC, spec_from_record, spec_to_record,
)
from .data import WindowBatch
from .errors import (
    BadDims, DimMismatch, MissingFile, NotConverged, ParseError, QOutOfRange,
)
from . import predictors

DESIGN_DIRECT = "direct"
DESIGN_TIED = "tied"

MAX_PARAM_DIM = 12
MAX_PRED_LEN = 4


@dataclass
class ConvexInstance:
    name: str
    design: str
    windows: WindowBatch
    spec: ConstraintSpec
    bias: bool = True

    def __post_init__(self):
        if self.design not in (DESIGN_DIRECT, DESIGN_TIED):
            raise BadDims(f"unknown design {self.design!r}")
        if self.spec.mode == MODE_MONOTONIC:
            raise BadDims("oracle instances use per-step epsilon bounds")
        if self.pred_len > MAX_PRED_LEN:
            raise BadDims(f"pred_len {self.pred_len} > {MAX_PRED_LEN}")
        if self.param_dim > MAX_PARAM_DIM:
            raise BadDims(f"param dim {self.param_dim} > {MAX_PARAM_DIM}")
        if self.spec.epsilon.shape[0] != self.pred_len:
            raise DimMismatch("epsilon length must equal pred_len")

    @property
    def context_len(self):
        return self.windows.contexts.shape[1]

    @property
    def in_channels(self):
        return self.windows.contexts.shape[2]

    @property
    def pred_len(self):
        return self.windows.targets.shape[1]

    @property
    def target_channels(self):
        return self.windows.targets.shape[2]

    @property
    def din(self):
        return self.context_len * self.in_channels

    @property
    def param_dim(self):
        ct = self.target_channels
        cols = self.pred_len * ct if self.design == DESIGN_DIRECT else ct
        return self.din * cols + (cols if self.bias else 0)

    def arch(self):
        """The predictors arch matching this design (bias required there)."""
        if not self.bias:
            raise BadDims("only bias-carrying instances map to a predictor arch")
        return (predictors.ARCH_DIRECT if self.design == DESIGN_DIRECT
                else predictors.ARCH_TIED)

    def predictor_dims(self):
        return predictors.PredictorDims(
            context_len=self.context_len, pred_len=self.pred_len,
            in_channels=self.in_channels, target_channels=self.target_channels)


def step_quadratics(inst):
    """Per-step loss quadratics: loss_i(theta) = theta'A_i theta - 2 b_i'theta + c_i.

    Averaging matches predictors.step_losses: over windows and target
    channels. Rows follow the predictors flat layout, so a trainer theta
    plugs in unchanged.
    """
    X = inst.windows.contexts.reshape(inst.windows.count, -1)
    Y = inst.windows.targets  # (N, tp, ct)
    n, k = inst.windows.count, inst.param_dim
    ct, tp, din = inst.target_channels, inst.pred_len, inst.din
    quads = []
    for i in range(tp):
        rows = np.zeros((n * ct, k))
        t = np.zeros(n * ct)
        for c in range(ct):
            sl = slice(c * n, (c + 1) * n)
            t[sl] = Y[:, i, c]
            if inst.design == DESIGN_TIED:
                col0 = c  # W[r, c] at r*ct + c
                rows[sl, col0:din * ct:ct] = X
                if inst.bias:
                    rows[sl, din * ct + c] = 1.0
            else:
                j = i * ct + c
                dout = tp * ct
                rows[sl, j:din * dout:dout] = X
                if inst.bias:
                    rows[sl, din * dout + j] = 1.0
        scale = 1.0 / (n * ct)
        quads.append((rows.T @ rows * scale, rows.T @ t * scale,
                      float(t @ t) * scale))
    return quads


def loss_at(quads, theta):
    return np.array([float(theta @ A @ theta - 2.0 * b @ theta + c)
                     for A, b, c in quads])


def objective_at(quads, theta):
    return float(np.mean(loss_at(quads, theta)))


@dataclass
class OracleSolution:
    theta_star: np.ndarray
    lam_star: np.ndarray
    zeta_star: np.ndarray
    primal_value: float
    dual_value: float
    slacks: np.ndarray
    residuals: dict
    iterations: int


def _kkt_residuals(quads, eps, lam, theta, alpha=None):
    """Residuals at an exact inner minimizer: stationarity from the linear
    solve, feasibility and complementarity from the slacks."""
    tp = len(quads)
    w = 1.0 / tp + lam
    A = sum(wi * q[0] for wi, q in zip(w, quads))
    b = sum(wi * q[1] for wi, q in zip(w, quads))
    stat = float(np.max(np.abs(2.0 * (A @ theta - b))))
    losses = loss_at(quads, theta)
    zeta = lam / alpha if alpha is not None else np.zeros(tp)
    s = losses - (eps + zeta)
    feas = float(max(0.0, np.max(s)))
    comp = float(np.max(np.abs(lam * s)))
    return {"stationarity": stat, "feasibility": feas, "complementarity": comp}, s


def solve_projected(inst, relaxation=None, tol=1e-6, max_iters=20000,
                    step0=0.5, tau=500.0):
    """Projected dual ascent with exact primal minimization.

    Maximizes the dual g(lambda) = min_theta L(theta, lambda) over
    lambda >= 0 with diminishing steps step0/sqrt(1 + t/tau). The second
    half of the trajectory is averaged; whichever of (last iterate,
    average) certifies first wins. relaxation switches to the
    slack-relaxed problem: the dual gains a -||lambda||^2/(2 alpha) term
    and the implied slack is lambda/alpha.
    """
    quads = step_quadratics(inst)
    tp = inst.pred_len
    eps = inst.spec.epsilon
    alpha = relaxation.alpha if relaxation is not None else None

    def inner(lam):
        w = 1.0 / tp + lam
        A = sum(wi * q[0] for wi, q in zip(w, quads))
        b = sum(wi * q[1] for wi, q in zip(w, quads))
        return np.linalg.solve(A, b)

    def dual_value(lam, theta):
        losses = loss_at(quads, theta)
        g = float(np.mean(losses) + lam @ (losses - eps))
        if alpha is not None:
            g -= float(lam @ lam) / (2.0 * alpha)
        return g

    def certify(lam):
        theta = inner(lam)
        res, s = _kkt_residuals(quads, eps, lam, theta, alpha)
        worst = max(res.values())
        return worst, theta, res, s

    lam = np.zeros(tp)
    avg = np.zeros(tp)
    n_avg = 0
    best = None
    for t in range(1, max_iters + 1):
        theta = inner(lam)
        losses = loss_at(quads, theta)
        grad = losses - eps
        if alpha is not None:
            grad = grad - lam / alpha
        lam = np.maximum(0.0, lam + step0 / math.sqrt(1.0 + t / tau) * grad)
        if t > max_iters // 2:
            avg += lam
            n_avg += 1
        if t % 200 == 0 or t == max_iters:
            candidates = [lam] if n_avg == 0 else [lam, avg / n_avg]
            for cand in candidates:
                worst, th, res, s = certify(cand)
                if best is None or worst < best[0]:
                    best = (worst, cand.copy(), th, res, s, t)
                if worst <= tol:
                    zeta = (cand / alpha if alpha is not None
                            else np.zeros(tp))
                    return OracleSolution(
                        theta_star=th, lam_star=cand.copy(), zeta_star=zeta,
                        primal_value=objective_at(quads, th),
                        dual_value=dual_value(cand, th),
                        slacks=s, residuals=res, iterations=t)
    raise NotConverged(best[3], f"instance {inst.name!r} after {best[5]} iters")


# --- finite differences -------------------------------------------------------

def fd_gradient(params, batch, weights, h=1e-5):
    """Central-difference gradient of the weighted loss, one coordinate at
    a time. The independent check for predictors.weighted_loss_grad."""
    if not (1e-7 <= h <= 1e-3):
        raise QOutOfRange(f"step h must lie in [1e-7, 1e-3], got {h}")
    grad = np.empty(params.theta.shape[0])
    for i in range(params.theta.shape[0]):
        plus = params.copy()
        minus = params.copy()
        plus.theta[i] += h
        minus.theta[i] -= h
        lp, _, _ = predictors.weighted_loss_grad(plus, batch, weights)
        lm, _, _ = predictors.weighted_loss_grad(minus, batch, weights)
        grad[i] = (lp - lm) / (2.0 * h)
    return grad


# --- duality gap ---------------------------------------------------------------

@dataclass
class GapResult:
    gap: float
    primal_value: float
    dual_value: float
    max_violation: float
    used_oracle_point: bool


def duality_gap(inst, theta, lam, feas_tol=1e-8):
    """P(feasible point) minus the dual lower bound at lam.

    The dual bound is min_theta L(theta, lam), computed exactly. When the
    supplied theta is infeasible beyond feas_tol, the primal side falls
    back to the oracle's own feasible solution and the result is flagged
    (used_oracle_point)."""
    quads = step_quadratics(inst)
    tp = inst.pred_len
    eps = inst.spec.epsilon
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if lam.shape[0] != tp:
        raise DimMismatch(f"need {tp} multipliers, got {lam.shape[0]}")

    losses = loss_at(quads, theta)
    max_violation = float(np.max(losses - eps))
    used_oracle = max_violation > feas_tol
    if used_oracle:
        sol = solve_projected(inst)
        primal_value = sol.primal_value
    else:
        primal_value = float(np.mean(losses))

    w = 1.0 / tp + lam
    A = sum(wi * q[0] for wi, q in zip(w, quads))
    b = sum(wi * q[1] for wi, q in zip(w, quads))
    theta_min = np.linalg.solve(A, b)
    inner_losses = loss_at(quads, theta_min)
    dual_value = float(np.mean(inner_losses) + lam @ (inner_losses - eps))
    return GapResult(gap=primal_value - dual_value,
                     primal_value=primal_value, dual_value=dual_value,
                     max_violation=max_violation,
                     used_oracle_point=used_oracle)


# --- instance I/O ---------------------------------------------------------------

def save_instance(inst, path, solution=None):
    """Checkpoint-style text: header, flat context/target values one per
    line, and optionally the frozen oracle outputs."""
    with open(path, "w") as fh:
        fh.write(f"name = {inst.name}\n")
        fh.write(f"design = {inst.design}\n")
        fh.write(f"bias = {int(inst.bias)}\n")
        fh.write(f"context_len = {inst.context_len}\n")
        fh.write(f"pred_len = {inst.pred_len}\n")
        fh.write(f"in_channels = {inst.in_channels}\n")
        fh.write(f"target_channels = {inst.target_channels}\n")
        fh.write(f"n_windows = {inst.windows.count}\n")
        for key, val in spec_to_record(inst.spec).items():
            fh.write(f"{key} = {val}\n")
        fh.write("begin_contexts\n")
        for x in inst.windows.contexts.ravel():
            fh.write(repr(float(x)) + "\n")
        fh.write("end_contexts\n")
        fh.write("begin_targets\n")
        for x in inst.windows.targets.ravel():
            fh.write(repr(float(x)) + "\n")
        fh.write("end_targets\n")
        if solution is not None:
            fh.write(f"oracle.primal_value = {repr(solution.primal_value)}\n")
            fh.write("oracle.lambda = "
                     + ",".join(repr(float(x)) for x in solution.lam_star) + "\n")
            fh.write("oracle.theta = "
                     + ",".join(repr(float(x)) for x in solution.theta_star) + "\n")


def load_instance(path):
    """Returns (instance, frozen) where frozen holds any stored oracle
    outputs ('primal_value', 'lambda', 'theta') or is None."""
    if not os.path.isfile(path):
        raise MissingFile(f"no such instance file: {path}")
    header = {}
    blocks = {"contexts": [], "targets": []}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("begin_"):
                current = line[len("begin_"):]
                if current not in blocks:
                    raise ParseError(path, lineno, 1, f"unknown block {current!r}")
                continue
            if line.startswith("end_"):
                current = None
                continue
            if current is not None:
                try:
                    blocks[current].append(float(line))
                except ValueError:
                    raise ParseError(path, lineno, 1,
                                     f"bad value {line!r}") from None
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ParseError(path, lineno, 1, f"expected key = value: {line!r}")
            header[key.strip()] = val.strip()
    try:
        n = int(header["n_windows"])
        tc = int(header["context_len"])
        tp = int(header["pred_len"])
        cin = int(header["in_channels"])
        ct = int(header["target_channels"])
        contexts = np.array(blocks["contexts"]).reshape(n, tc, cin)
        targets = np.array(blocks["targets"]).reshape(n, tp, ct)
        spec, _ = spec_from_record(header)
        inst = ConvexInstance(
            name=header["name"], design=header["design"],
            windows=WindowBatch(contexts, targets), spec=spec,
            bias=bool(int(header["bias"])))
    except KeyError as exc:
        raise ParseError(path, 1, 1, f"missing field {exc}") from None
    frozen = None
    if "oracle.primal_value" in header:
        frozen = {
            "primal_value": float(header["oracle.primal_value"]),
            "lambda": np.array([float(x) for x
                                in header["oracle.lambda"].split(",")]),
            "theta": np.array([float(x) for x
                               in header["oracle.theta"].split(",")]),
        }
    return inst, frozen


# --- deterministic instance construction ---------------------------------------

def _ls_base_losses(name, design, windows):
    """Per-step losses at the unconstrained least-squares solution."""
    pred_len = windows.targets.shape[1]
    probe = ConvexInstance(
        name=name, design=design, windows=windows,
        spec=ConstraintSpec("constant", np.full(pred_len, 1e9)))
    quads = step_quadratics(probe)
    A = sum(q[0] for q in quads)
    b = sum(q[1] for q in quads)
    theta_ls = np.linalg.solve(A, b)
    return loss_at(quads, theta_ls)


def make_tied_instance(name, seed, n_windows=32, context_len=2, pred_len=3,
                       step_targets=None, noise=0.05, eps_scale=10.0,
                       eps_growth=1.0):
    """A coupled convex instance: one shared affine map must serve
    pred_len steps whose ideal per-step maps differ, so tightening one
    step's bound genuinely moves the shared parameters.

    step_targets: per-step true coefficient vectors, shape
    (pred_len, context_len); defaults to a seeded draw. The bound level is
    eps_scale times the worst per-step loss of the unconstrained shared-map
    solution: scales < 1 make the worst-fit steps bind, 10 leaves every
    bound slack. eps_growth > 1 instead emits the non-decreasing profile
    level * growth^i (exponential mode), whose tightest bound is step 1.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n_windows, context_len, 1))
    if step_targets is None:
        step_targets = rng.normal(0.0, 1.0, size=(pred_len, context_len))
    step_targets = np.asarray(step_targets, dtype=np.float64)
    Y = np.empty((n_windows, pred_len, 1))
    flat = X.reshape(n_windows, context_len)
    for i in range(pred_len):
        Y[:, i, 0] = flat @ step_targets[i] + rng.normal(0.0, noise, n_windows)
    windows = WindowBatch(X, Y)
    base = _ls_base_losses(name, DESIGN_TIED, windows)
    level = float(eps_scale) * float(np.max(base))
    if eps_growth > 1.0:
        eps = level * float(eps_growth) ** np.arange(pred_len)
        spec = ConstraintSpec("exponential", eps)
    else:
        spec = ConstraintSpec("constant", np.full(pred_len, level))
    return ConvexInstance(name=name, design=DESIGN_TIED, windows=windows,
                          spec=spec)


def make_direct_instance(name, seed, n_windows=24, context_len=2, pred_len=2,
                         noise=0.1, eps_scale=8.0):
    """A DirectLinear instance. Per-step losses live on disjoint parameter
    blocks here, so bounds are kept slack: this instance checks oracle and
    trainer against the plain least-squares solution."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n_windows, context_len, 1))
    M = rng.normal(0.0, 1.0, size=(context_len, pred_len))
    Y = (X.reshape(n_windows, -1) @ M
         + rng.normal(0.0, noise, (n_windows, pred_len)))
    windows = WindowBatch(X, Y.reshape(n_windows, pred_len, 1))
    base = _ls_base_losses(name, DESIGN_DIRECT, windows)
    level = float(eps_scale) * float(np.max(base))
    return ConvexInstance(name=name, design=DESIGN_DIRECT, windows=windows,
                          spec=ConstraintSpec("constant", np.full(pred_len, level)))
