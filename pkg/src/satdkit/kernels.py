"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: numba is used when it is
importable, unless SATDKIT_DISABLE_NUMBA is set to a truthy value, in which
case the numpy implementations run instead.  Both backends implement the
same contracts and are individually deterministic; bit-level agreement
*across* backends is not guaranteed because summation orders differ.

Run ``python benchmarks/bench_kernels.py`` to compare the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("SATDKIT_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLE:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# convolution + 1-max pooling
#
# X        : (B, T, D) float64, embedded tokens, T = max true_length in batch
# lengths  : (B,) int64, true lengths (windows never cross a length boundary)
# w_t      : (r*D, F) float64, filters flattened and transposed
# b        : (F,) float64, one bias per filter
# returns  : pooled (B, F) float64  = max(0, max_p conv[p])   (0 if L < r)
#            argmax (B, F) int64    = first position of the pre-bias max,
#                                     -1 if no valid position
# The bias is constant per filter so it is added after the positional max.
# ---------------------------------------------------------------------------


def _conv_pool_forward_np(X, lengths, w_t, b):
    B, T, D = X.shape
    rD, F = w_t.shape
    r = rD // D
    pooled = np.zeros((B, F))
    argmax = np.full((B, F), -1, np.int64)
    n_max = T - r + 1
    if n_max < 1:
        return pooled, argmax
    windows = np.lib.stride_tricks.sliding_window_view(X, (r, D), axis=(1, 2))
    flat = windows.reshape(B * n_max, rD)
    conv = (flat @ w_t).reshape(B, n_max, F)
    pos = np.arange(n_max)[None, :, None]
    valid = pos < (lengths[:, None, None] - r + 1)
    conv = np.where(valid, conv, -np.inf)
    any_valid = lengths >= r
    best = conv.max(axis=1)
    arg = conv.argmax(axis=1)
    pooled[any_valid] = np.maximum(best[any_valid] + b[None, :], 0.0)
    argmax[any_valid] = arg[any_valid]
    return pooled, argmax


def _conv_pool_backward_np(grad_pooled, pooled, argmax, X, w_t, r):
    B, T, D = X.shape
    rD, F = w_t.shape
    W = np.ascontiguousarray(w_t.T).reshape(F, r, D)
    g = np.where((pooled > 0.0) & (argmax >= 0), grad_pooled, 0.0)
    grad_b = g.sum(axis=0)
    pos = np.maximum(argmax, 0)
    rows = np.arange(B)[:, None]
    grad_w = np.zeros((F, r, D))
    grad_x = np.zeros_like(X)
    for j in range(r):
        at = np.minimum(pos + j, T - 1)  # in bounds; g == 0 wherever clamping bites
        tok = X[rows, at]  # (B, F, D)
        grad_w[:, j, :] += np.einsum("bf,bfd->fd", g, tok)
        np.add.at(grad_x, (rows, at), g[:, :, None] * W[None, :, j, :])
    return grad_w, grad_b, grad_x


def _embedding_grad_np(grad_x, indices, n_rows):
    B, T, D = grad_x.shape
    grad_e = np.zeros((n_rows, D))
    np.add.at(grad_e, indices[:, :T].reshape(-1), grad_x.reshape(-1, D))
    return grad_e


def _adam_step_np(param, grad, m, v, lr, beta1, beta2, eps, t):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    scale = lr * np.sqrt(1.0 - beta2**t) / (1.0 - beta1**t)
    param -= scale * m / (np.sqrt(v) + eps)


def _skipgram_epoch_np(vin, vout, unit_indptr, unit_ids, centers, contexts,
                       negatives, lr_start, lr_end):
    n_pairs = centers.shape[0]
    dim = vin.shape[1]
    k = negatives.shape[1]
    for t in range(n_pairs):
        lr = lr_start + (lr_end - lr_start) * (t / n_pairs)
        c = centers[t]
        lo, hi = unit_indptr[c], unit_indptr[c + 1]
        units = unit_ids[lo:hi]
        h = vin[units].sum(axis=0)
        gh = np.zeros(dim, dtype=vin.dtype)
        for s in range(k + 1):
            if s == 0:
                target, label = contexts[t], 1.0
            else:
                target = negatives[t, s - 1]
                if target == contexts[t]:
                    continue
                label = 0.0
            score = float(h @ vout[target])
            score = min(max(score, -30.0), 30.0)
            sigma = 1.0 / (1.0 + np.exp(-score))
            g = (label - sigma) * lr
            gh += g * vout[target]
            vout[target] += g * h
        vin[units] += gh


if NUMBA_ENABLED:

    @njit(cache=True)
    def _conv_pool_forward_nb(X, lengths, w_t, b):  # pragma: no cover - numba
        B, T, D = X.shape
        rD, F = w_t.shape
        r = rD // D
        pooled = np.zeros((B, F))
        argmax = np.full((B, F), -1, np.int64)
        for i in range(B):
            n = lengths[i] - r + 1
            if n < 1:
                continue
            M = np.empty((n, rD))
            for p in range(n):
                for j in range(r):
                    base = j * D
                    for d in range(D):
                        M[p, base + d] = X[i, p + j, d]
            conv = np.dot(M, w_t)
            for f in range(F):
                best = conv[0, f]
                bestp = 0
                for p in range(1, n):
                    if conv[p, f] > best:
                        best = conv[p, f]
                        bestp = p
                best += b[f]
                argmax[i, f] = bestp
                pooled[i, f] = best if best > 0.0 else 0.0
        return pooled, argmax

    @njit(cache=True)
    def _conv_pool_backward_nb(grad_pooled, pooled, argmax, X, w_t, r):  # pragma: no cover
        B, T, D = X.shape
        rD, F = w_t.shape
        grad_w = np.zeros((F, r, D))
        grad_b = np.zeros(F)
        grad_x = np.zeros((B, T, D))
        for i in range(B):
            for f in range(F):
                if pooled[i, f] <= 0.0 or argmax[i, f] < 0:
                    continue
                g = grad_pooled[i, f]
                p = argmax[i, f]
                grad_b[f] += g
                for j in range(r):
                    base = j * D
                    for d in range(D):
                        grad_w[f, j, d] += g * X[i, p + j, d]
                        grad_x[i, p + j, d] += g * w_t[base + d, f]
        return grad_w, grad_b, grad_x

    @njit(cache=True)
    def _embedding_grad_nb(grad_x, indices, n_rows):  # pragma: no cover - numba
        B, T, D = grad_x.shape
        grad_e = np.zeros((n_rows, D))
        for i in range(B):
            for t in range(T):
                row = indices[i, t]
                for d in range(D):
                    grad_e[row, d] += grad_x[i, t, d]
        return grad_e

    @njit(cache=True)
    def _adam_step_nb(param, grad, m, v, lr, beta1, beta2, eps, t):  # pragma: no cover
        scale = lr * np.sqrt(1.0 - beta2**t) / (1.0 - beta1**t)
        for i in range(param.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
            param[i] -= scale * m[i] / (np.sqrt(v[i]) + eps)

    @njit(cache=True)
    def _skipgram_epoch_nb(vin, vout, unit_indptr, unit_ids, centers, contexts,
                           negatives, lr_start, lr_end):  # pragma: no cover - numba
        n_pairs = centers.shape[0]
        dim = vin.shape[1]
        k = negatives.shape[1]
        h = np.zeros(dim, dtype=vin.dtype)
        gh = np.zeros(dim, dtype=vin.dtype)
        for t in range(n_pairs):
            lr = lr_start + (lr_end - lr_start) * (t / n_pairs)
            c = centers[t]
            lo, hi = unit_indptr[c], unit_indptr[c + 1]
            for d in range(dim):
                h[d] = 0.0
                gh[d] = 0.0
            for u in range(lo, hi):
                row = unit_ids[u]
                for d in range(dim):
                    h[d] += vin[row, d]
            for s in range(k + 1):
                if s == 0:
                    target = contexts[t]
                    label = 1.0
                else:
                    target = negatives[t, s - 1]
                    if target == contexts[t]:
                        continue
                    label = 0.0
                score = 0.0
                for d in range(dim):
                    score += h[d] * vout[target, d]
                if score > 30.0:
                    score = 30.0
                elif score < -30.0:
                    score = -30.0
                sigma = 1.0 / (1.0 + np.exp(-score))
                g = (label - sigma) * lr
                for d in range(dim):
                    gh[d] += g * vout[target, d]
                    vout[target, d] += g * h[d]
            for u in range(lo, hi):
                row = unit_ids[u]
                for d in range(dim):
                    vin[row, d] += gh[d]

    conv_pool_forward = _conv_pool_forward_nb
    conv_pool_backward = _conv_pool_backward_nb
    embedding_grad = _embedding_grad_nb
    _adam_step_flat = _adam_step_nb
    skipgram_epoch = _skipgram_epoch_nb
else:
    conv_pool_forward = _conv_pool_forward_np
    conv_pool_backward = _conv_pool_backward_np
    embedding_grad = _embedding_grad_np
    _adam_step_flat = _adam_step_np
    skipgram_epoch = _skipgram_epoch_np


def adam_step(param, grad, m, v, lr, beta1, beta2, eps, t):
    """In-place Adam update on an arbitrarily shaped float64 tensor."""
    _adam_step_flat(param.reshape(-1), grad.reshape(-1), m.reshape(-1),
                    v.reshape(-1), lr, beta1, beta2, eps, t)
