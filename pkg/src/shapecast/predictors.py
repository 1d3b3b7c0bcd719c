"""Forecaster parameterizations with analytic gradients.

Three architectures, all operating on a flattened context of length
context_len * in_channels and emitting pred_len * target_channels values:

  direct_linear  one affine map; every prediction step has its own rows.
  tied_linear    one affine map to a single step, repeated at every step
                 (couples all steps through shared parameters).
  mlp1           affine -> tanh -> affine with a shared hidden layer.

Parameters live in one flat float64 vector theta; the layout per arch is
documented in _shapes. Gradients are exact and are checked against central
finite differences in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadDims, DimMismatch, MissingFile, NonFiniteGradient, ParseError

ARCH_DIRECT = "direct_linear"
ARCH_TIED = "tied_linear"
ARCH_MLP1 = "mlp1"
ARCHES = (ARCH_DIRECT, ARCH_TIED, ARCH_MLP1)


@dataclass
class PredictorDims:
    context_len: int
    pred_len: int
    in_channels: int = 1
    target_channels: int = None
    hidden: int = 0

    def __post_init__(self):
        if self.target_channels is None:
            self.target_channels = self.in_channels
        for name in ("context_len", "pred_len", "in_channels", "target_channels"):
            if getattr(self, name) < 1:
                raise BadDims(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden < 0:
            raise BadDims(f"hidden must be >= 0, got {self.hidden}")

    @property
    def din(self):
        return self.context_len * self.in_channels

    @property
    def dout(self):
        return self.pred_len * self.target_channels


def _shapes(arch, dims):
    """Ordered (name, shape) pairs describing the flat theta layout."""
    if arch == ARCH_DIRECT:
        return [("W", (dims.din, dims.dout)), ("b", (dims.dout,))]
    if arch == ARCH_TIED:
        return [("W", (dims.din, dims.target_channels)),
                ("b", (dims.target_channels,))]
    if arch == ARCH_MLP1:
        if dims.hidden < 1:
            raise BadDims("mlp1 needs hidden >= 1")
        return [("W1", (dims.din, dims.hidden)), ("b1", (dims.hidden,)),
                ("W2", (dims.hidden, dims.dout)), ("b2", (dims.dout,))]
    raise BadDims(f"unknown arch {arch!r}")


def theta_size(arch, dims):
    return sum(int(np.prod(shape)) for _, shape in _shapes(arch, dims))


@dataclass
class PredictorParams:
    arch: str
    dims: PredictorDims
    theta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        want = theta_size(self.arch, self.dims)
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if self.theta.shape[0] != want:
            raise BadDims(
                f"theta has {self.theta.shape[0]} entries, {self.arch} needs {want}")

    def unpack(self):
        """Views into theta, one per weight tensor, in layout order."""
        out = []
        ofs = 0
        for _, shape in _shapes(self.arch, self.dims):
            n = int(np.prod(shape))
            out.append(self.theta[ofs:ofs + n].reshape(shape))
            ofs += n
        return out

    def copy(self):
        return PredictorParams(self.arch, self.dims, self.theta.copy(), self.seed)


def init_params(arch, dims, seed=0):
    """Zero init for the linear archs; fan-in-scaled symmetric uniform for mlp1."""
    n = theta_size(arch, dims)
    if arch in (ARCH_DIRECT, ARCH_TIED):
        return PredictorParams(arch, dims, np.zeros(n), seed)
    rng = np.random.default_rng(seed)
    parts = []
    fan_in = {"W1": dims.din, "b1": dims.din, "W2": dims.hidden, "b2": dims.hidden}
    for name, shape in _shapes(arch, dims):
        bound = 1.0 / np.sqrt(fan_in[name])
        parts.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
    return PredictorParams(arch, dims, np.concatenate(parts), seed)


def _flat_batch(p, batch):
    B = batch.contexts.shape[0]
    if batch.contexts.shape[1] != p.dims.context_len or \
            batch.contexts.shape[2] != p.dims.in_channels:
        raise DimMismatch(
            f"contexts {batch.contexts.shape} do not fit dims {p.dims}")
    if batch.targets.shape[1] != p.dims.pred_len or \
            batch.targets.shape[2] != p.dims.target_channels:
        raise DimMismatch(
            f"targets {batch.targets.shape} do not fit dims {p.dims}")
    X = np.ascontiguousarray(batch.contexts.reshape(B, p.dims.din),
                             dtype=np.float64)
    Y = np.ascontiguousarray(
        batch.targets.reshape(B, p.dims.pred_len * p.dims.target_channels),
        dtype=np.float64)
    return X, Y


def forward(p, contexts):
    """Predict: contexts (B, context_len, C_in) -> (B, pred_len, C_t)."""
    B = contexts.shape[0]
    if contexts.shape[1:] != (p.dims.context_len, p.dims.in_channels):
        raise DimMismatch(
            f"contexts {contexts.shape} do not fit dims {p.dims}")
    out_shape = (B, p.dims.pred_len, p.dims.target_channels)
    if B == 0:
        return np.empty(out_shape)
    X = np.ascontiguousarray(contexts.reshape(B, -1), dtype=np.float64)
    if p.arch == ARCH_DIRECT:
        W, b = p.unpack()
        P = kernels.dl_forward(W, b, X)
    elif p.arch == ARCH_TIED:
        W, b = p.unpack()
        P = kernels.tied_forward(W, b, X, p.dims.pred_len)
    else:
        W1, b1, W2, b2 = p.unpack()
        P = kernels.mlp_forward(W1, b1, W2, b2, X)
    return P.reshape(out_shape)


def step_losses(p, batch):
    """Squared error per prediction step, averaged over batch and channels."""
    X, Y = _flat_batch(p, batch)
    if X.shape[0] == 0:
        raise DimMismatch("cannot average losses over an empty batch")
    P = forward(p, batch.contexts).reshape(X.shape[0], -1)
    return kernels.step_losses(P, Y, p.dims.pred_len, p.dims.target_channels)


def uniform_weights(pred_len):
    return np.full(pred_len, 1.0 / pred_len)


def weighted_loss_grad(p, batch, weights):
    """Scalar sum_i weights[i] * step_loss[i], its exact gradient in theta,
    and the per-step losses. Weights may be negative (telescoped modes)."""
    X, Y = _flat_batch(p, batch)
    if X.shape[0] == 0:
        raise DimMismatch("cannot take a gradient over an empty batch")
    w = np.ascontiguousarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != p.dims.pred_len:
        raise DimMismatch(f"{w.shape[0]} weights for {p.dims.pred_len} steps")
    tp, nch = p.dims.pred_len, p.dims.target_channels
    if p.arch == ARCH_DIRECT:
        W, b = p.unpack()
        loss, losses, gW, gb = kernels.dl_loss_grad(W, b, X, Y, w, tp, nch)
        grad = np.concatenate([gW.ravel(), gb])
    elif p.arch == ARCH_TIED:
        W, b = p.unpack()
        loss, losses, gW, gb = kernels.tied_loss_grad(W, b, X, Y, w, tp, nch)
        grad = np.concatenate([gW.ravel(), gb])
    else:
        W1, b1, W2, b2 = p.unpack()
        loss, losses, gW1, gb1, gW2, gb2 = kernels.mlp_loss_grad(
            W1, b1, W2, b2, X, Y, w, tp, nch)
        grad = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NonFiniteGradient("loss or gradient overflowed")
    return float(loss), np.asarray(losses), grad


# --- checkpoints -----------------------------------------------------------

def save_checkpoint(p, path):
    """Text checkpoint: header fields, then one repr() float per line.

    repr() emits the shortest decimal that parses back to the identical
    float64, so load(save(p)) reproduces theta bit-for-bit.
    """
    with open(path, "w") as fh:
        fh.write(f"arch = {p.arch}\n")
        d = p.dims
        fh.write(f"context_len = {d.context_len}\n")
        fh.write(f"pred_len = {d.pred_len}\n")
        fh.write(f"in_channels = {d.in_channels}\n")
        fh.write(f"target_channels = {d.target_channels}\n")
        fh.write(f"hidden = {d.hidden}\n")
        fh.write(f"seed = {p.seed}\n")
        fh.write(f"theta_len = {p.theta.shape[0]}\n")
        for x in p.theta:
            fh.write(repr(float(x)) + "\n")


def load_checkpoint(path):
    import os
    if not os.path.isfile(path):
        raise MissingFile(f"no such checkpoint: {path}")
    header = {}
    theta = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if "=" in line and not theta:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
            else:
                try:
                    theta.append(float(line))
                except ValueError:
                    raise ParseError(path, lineno, 1,
                                     f"bad theta line {line!r}") from None
    try:
        dims = PredictorDims(
            context_len=int(header["context_len"]),
            pred_len=int(header["pred_len"]),
            in_channels=int(header["in_channels"]),
            target_channels=int(header["target_channels"]),
            hidden=int(header["hidden"]))
        arch = header["arch"]
        seed = int(header["seed"])
        n = int(header["theta_len"])
    except KeyError as exc:
        raise ParseError(path, 1, 1, f"missing header field {exc}") from None
    if len(theta) != n:
        raise ParseError(path, 1, 1,
                         f"theta_len says {n}, found {len(theta)} values")
    return PredictorParams(arch, dims, np.array(theta, dtype=np.float64), seed)
