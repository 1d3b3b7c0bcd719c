"""Numba-compiled twins of the kernels in numpy_impl.py.

Same signatures, same semantics. Matmuls go through np.dot (BLAS), the
reductions are explicit loops, so results can differ from the numpy
backend at the level of float rounding (numpy sums pairwise); tests
compare the two backends at 1e-12 relative tolerance.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=False)


@njit(**_JIT)
def dl_forward(W, b, X):
    P = np.dot(X, W)
    for i in range(P.shape[0]):
        P[i, :] += b
    return P


@njit(**_JIT)
def tied_forward(W, b, X, tp):
    S = np.dot(X, W)
    B = X.shape[0]
    nch = W.shape[1]
    P = np.empty((B, tp * nch))
    for i in range(B):
        for t in range(tp):
            for c in range(nch):
                P[i, t * nch + c] = S[i, c] + b[c]
    return P


@njit(**_JIT)
def mlp_forward(W1, b1, W2, b2, X):
    H = np.dot(X, W1)
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            H[i, j] = np.tanh(H[i, j] + b1[j])
    P = np.dot(H, W2)
    for i in range(P.shape[0]):
        P[i, :] += b2
    return P


@njit(**_JIT)
def step_losses(P, Y, tp, nch):
    B = P.shape[0]
    losses = np.zeros(tp)
    for i in range(B):
        for t in range(tp):
            acc = 0.0
            for c in range(nch):
                e = P[i, t * nch + c] - Y[i, t * nch + c]
                acc += e * e
            losses[t] += acc
    return losses / (B * nch)


@njit(**_JIT)
def _weighted_output_grad(P, Y, w, tp, nch):
    B = P.shape[0]
    losses = np.zeros(tp)
    G = np.empty((B, tp * nch))
    scale = 2.0 / (B * nch)
    for i in range(B):
        for t in range(tp):
            for c in range(nch):
                e = P[i, t * nch + c] - Y[i, t * nch + c]
                losses[t] += e * e
                G[i, t * nch + c] = scale * w[t] * e
    losses /= B * nch
    loss = 0.0
    for t in range(tp):
        loss += w[t] * losses[t]
    return loss, losses, G


@njit(**_JIT)
def _colsum(G):
    out = np.zeros(G.shape[1])
    for i in range(G.shape[0]):
        out += G[i, :]
    return out


@njit(**_JIT)
def dl_loss_grad(W, b, X, Y, w, tp, nch):
    P = dl_forward(W, b, X)
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    gW = np.dot(X.T, G)
    gb = _colsum(G)
    return loss, losses, gW, gb


@njit(**_JIT)
def tied_loss_grad(W, b, X, Y, w, tp, nch):
    B = X.shape[0]
    P = tied_forward(W, b, X, tp)
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    Gs = np.zeros((B, nch))
    for i in range(B):
        for t in range(tp):
            for c in range(nch):
                Gs[i, c] += G[i, t * nch + c]
    gW = np.dot(X.T, Gs)
    gb = _colsum(Gs)
    return loss, losses, gW, gb


@njit(**_JIT)
def mlp_loss_grad(W1, b1, W2, b2, X, Y, w, tp, nch):
    H = np.dot(X, W1)
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            H[i, j] = np.tanh(H[i, j] + b1[j])
    P = np.dot(H, W2)
    for i in range(P.shape[0]):
        P[i, :] += b2
    loss, losses, G = _weighted_output_grad(P, Y, w, tp, nch)
    gW2 = np.dot(H.T, G)
    gb2 = _colsum(G)
    dpre = np.dot(G, W2.T)
    for i in range(dpre.shape[0]):
        for j in range(dpre.shape[1]):
            dpre[i, j] *= 1.0 - H[i, j] * H[i, j]
    gW1 = np.dot(X.T, dpre)
    gb1 = _colsum(dpre)
    return loss, losses, gW1, gb1, gW2, gb2
