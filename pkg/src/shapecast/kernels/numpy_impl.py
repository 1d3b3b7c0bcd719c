"""Pure-numpy reference implementations of the hot kernels.

Every function here has a numba twin in numba_impl.py with the same
signature and semantics. Shapes use B = batch, din = flattened context
length, dout = tp * nch.

Loss convention: losses[i] is the squared error at prediction step i,
averaged over batch and channels. The scalar loss is sum_i w[i] * losses[i].
"""

import numpy as np


def dl_forward(W, b, X):
    # W: (din, dout), b: (dout,), X: (B, din) -> (B, dout)
    return X @ W + b


def tied_forward(W, b, X, tp):
    # One affine map (din -> nch) emitted at every step: (B, tp * nch)
    S = X @ W + b
    return np.tile(S, (1, tp))


def mlp_forward(W1, b1, W2, b2, X):
    H = np.tanh(X @ W1 + b1)
    return H @ W2 + b2


def step_losses(P, Y, tp, nch):
    # P, Y: (B, tp * nch) -> (tp,)
    E = (P - Y).reshape(P.shape[0], tp, nch)
    return np.einsum("btc,btc->t", E, E) / (P.shape[0] * nch)


def _weighted_output_grad(P, Y, w, tp, nch):
    B = P.shape[0]
    E = (P - Y).reshape(B, tp, nch)
    losses = np.einsum("btc,btc->t", E, E) / (B * nch)
    loss = float(np.dot(w, losses))
    G = (2.0 / (B * nch)) * (E * w[None, :, None])
    return loss, losses, G.reshape(B, tp * nch)


def dl_loss_grad(W, b, X, Y, w, tp, nch):
    P = X @ W + b
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    gW = X.T @ G
    gb = G.sum(axis=0)
    return loss, losses, gW, gb


def tied_loss_grad(W, b, X, Y, w, tp, nch):
    S = X @ W + b
    P = np.tile(S, (1, tp))
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    # Shared map: fold the per-step output gradients back onto the one map.
    Gs = G.reshape(X.shape[0], tp, nch).sum(axis=1)
    gW = X.T @ Gs
    gb = Gs.sum(axis=0)
    return loss, losses, gW, gb


def mlp_loss_grad(W1, b1, W2, b2, X, Y, w, tp, nch):
    H = np.tanh(X @ W1 + b1)
    P = H @ W2 + b2
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    gW2 = H.T @ G
    gb2 = G.sum(axis=0)
    dpre = (G @ W2.T) * (1.0 - H * H)
    gW1 = X.T @ dpre
    gb1 = dpre.sum(axis=0)
    return loss, losses, gW1, gb1, gW2, gb2
