"""Numeric-kernel contracts: brute-force oracles, finite differences, and
agreement between the selected backend and the pure-numpy fallback."""

from __future__ import annotations

import numpy as np
import pytest

from satdkit import kernels


def brute_conv_pool(X, lengths, w_t, b):
    """Reference forward pass: explicit loops, no masking tricks."""
    B, T, D = X.shape
    rD, F = w_t.shape
    r = rD // D
    pooled = np.zeros((B, F))
    argmax = np.full((B, F), -1, np.int64)
    for i in range(B):
        L = int(lengths[i])
        n_pos = L - r + 1
        if n_pos < 1:
            continue
        conv = np.array([X[i, p:p + r].reshape(-1) @ w_t for p in range(n_pos)])
        argmax[i] = conv.argmax(axis=0)
        pooled[i] = np.maximum(conv.max(axis=0) + b, 0.0)
    return pooled, argmax


def random_case(rng, B=3, T=9, D=4, F=5, r=2):
    X = rng.normal(size=(B, T, D))
    lengths = rng.integers(1, T + 1, size=B).astype(np.int64)
    lengths[0] = T  # _forward_batch slices to the batch max; pin it
    w_t = np.ascontiguousarray(rng.normal(size=(r * D, F)))
    b = rng.normal(size=F)
    return X, lengths, w_t, b


@pytest.mark.parametrize("r", [1, 2, 3, 5])
def test_forward_matches_brute_force(r):
    rng = np.random.default_rng([100, r])
    X, lengths, w_t, b = random_case(rng, r=r)
    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
    want_pooled, want_argmax = brute_conv_pool(X, lengths, w_t, b)
    np.testing.assert_allclose(pooled, want_pooled, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(argmax, want_argmax)


def test_short_sections_pool_zero_with_no_argmax():
    rng = np.random.default_rng(5)
    X, lengths, w_t, b = random_case(rng, B=4, T=6, r=3)
    lengths = np.array([6, 3, 2, 1], dtype=np.int64)  # last two shorter than r
    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
    assert np.all(pooled[2:] == 0.0)
    assert np.all(argmax[2:] == -1)
    assert np.all(argmax[:2] >= 0)


def test_feature_map_length_law():
    rng = np.random.default_rng(6)
    for _ in range(50):
        T = int(rng.integers(1, 20))
        r = int(rng.integers(1, 7))
        X, lengths, w_t, b = random_case(rng, B=2, T=T, r=r)
        lengths = rng.integers(1, T + 1, size=2).astype(np.int64)
        lengths[0] = T
        _, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
        for i in range(2):
            valid = int(lengths[i]) - r + 1
            if valid < 1:
                assert np.all(argmax[i] == -1)
            else:
                assert np.all((argmax[i] >= 0) & (argmax[i] < valid))


def test_padding_positions_never_win():
    """Huge values hidden behind the length boundary must not leak in."""
    rng = np.random.default_rng(7)
    X, lengths, w_t, b = random_case(rng, B=2, T=10, r=2)
    lengths = np.array([10, 4], dtype=np.int64)
    X[1, 4:] = 1e6  # beyond row 1's true length
    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
    trimmed, trimmed_arg = kernels.conv_pool_forward(
        np.ascontiguousarray(X[1:, :4]), lengths[1:], w_t, b)
    np.testing.assert_allclose(pooled[1], trimmed[0], rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(argmax[1], trimmed_arg[0])


def _fd_grad(f, x, h=1e-6):
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f()
        flat[i] = keep - h
        down = f()
        flat[i] = keep
        gflat[i] = (up - down) / (2 * h)
    return grad


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(8)
    r = 2
    X, lengths, w_t, b = random_case(rng, B=3, T=7, D=3, F=4, r=r)
    grad_pooled = rng.normal(size=(3, 4))

    def objective():
        pooled, _ = kernels.conv_pool_forward(X, lengths, w_t, b)
        return float(np.sum(grad_pooled * pooled))

    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
    gw, gb, gx = kernels.conv_pool_backward(grad_pooled, pooled, argmax, X, w_t, r)
    gw_flat = np.ascontiguousarray(
        gw.reshape(4, r * 3).T)  # kernel returns (F, r, D); compare as (rD, F)
    assert _rel_err(gw_flat, _fd_grad(objective, w_t)) < 1e-6
    assert _rel_err(gb, _fd_grad(objective, b)) < 1e-6
    assert _rel_err(gx, _fd_grad(objective, X)) < 1e-6


def test_backward_silent_on_inactive_features():
    """Features with pooled == 0 (rectifier off) or argmax == -1 get no grad."""
    rng = np.random.default_rng(9)
    X, lengths, w_t, b = random_case(rng, B=2, T=5, r=3)
    lengths = np.array([5, 2], dtype=np.int64)  # row 1 shorter than r
    b[:] = -1e3  # rectifier floors everything in row 0
    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, b)
    assert np.all(pooled == 0.0)
    gw, gb, gx = kernels.conv_pool_backward(
        np.ones_like(pooled), pooled, argmax, X, w_t, 3)
    assert np.all(gw == 0.0) and np.all(gb == 0.0) and np.all(gx == 0.0)


def test_embedding_grad_scatter_adds_rows():
    rng = np.random.default_rng(10)
    grad_x = rng.normal(size=(2, 4, 3))
    indices = np.array([[1, 2, 2, 0], [5, 1, 0, 0]], dtype=np.int64)
    grad_e = kernels.embedding_grad(grad_x, indices, 6)
    want = np.zeros((6, 3))
    for i in range(2):
        for t in range(4):
            want[indices[i, t]] += grad_x[i, t]
    np.testing.assert_allclose(grad_e, want, rtol=1e-12, atol=1e-12)


def test_adam_first_step_closed_form():
    """At t=1 with zero state the step is lr*sqrt(1-b2)*g / (sqrt(1-b2)*|g| + eps):
    a unit-magnitude move per coordinate, up to the epsilon guard."""
    rng = np.random.default_rng(11)
    param = rng.normal(size=(4, 3))
    grad = rng.normal(size=(4, 3))
    before = param.copy()
    m = np.zeros_like(param)
    v = np.zeros_like(param)
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    kernels.adam_step(param, grad, m, v, lr, b1, b2, eps, 1)
    scale = lr * np.sqrt(1 - b2) / (1 - b1)
    want = before - scale * (1 - b1) * grad / (np.sqrt(1 - b2) * np.abs(grad) + eps)
    np.testing.assert_allclose(param, want, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(m, (1 - b1) * grad)
    np.testing.assert_allclose(v, (1 - b2) * grad * grad)
    # step magnitude is ~lr per coordinate regardless of gradient scale
    assert np.all(np.abs(param - before) < lr * 1.001)


def test_adam_two_steps_match_reference_recurrence():
    """Bias correction is folded into the step size:
    param -= lr * sqrt(1 - b2^t) / (1 - b1^t) * m / (sqrt(v) + eps)."""
    rng = np.random.default_rng(12)
    param = rng.normal(size=5)
    g1, g2 = rng.normal(size=5), rng.normal(size=5)
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8

    got = param.copy()
    gm, gv = np.zeros(5), np.zeros(5)
    kernels.adam_step(got, g1, gm, gv, lr, b1, b2, eps, 1)
    kernels.adam_step(got, g2, gm, gv, lr, b1, b2, eps, 2)

    ref = param.copy()
    m = np.zeros(5)
    v = np.zeros(5)
    for t, g in ((1, g1), (2, g2)):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        scale = lr * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
        ref -= scale * m / (np.sqrt(v) + eps)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-15)


def test_adam_step_works_on_any_shape():
    param = np.ones((2, 3, 4))
    grad = np.full((2, 3, 4), 0.5)
    kernels.adam_step(param, grad, np.zeros_like(param), np.zeros_like(param),
                      1e-3, 0.9, 0.999, 1e-8, 1)
    assert param.shape == (2, 3, 4)
    assert np.all(param < 1.0)


# ------------------------------------------------- backend selection & parity


def test_backend_flag_reports_selected_implementation():
    assert kernels.BACKEND in ("numba", "numpy")
    assert kernels.NUMBA_ENABLED == (kernels.BACKEND == "numba")


def test_backends_agree_on_forward_and_backward():
    """The selected backend and the numpy fallback implement one contract."""
    rng = np.random.default_rng(13)
    X, lengths, w_t, b = random_case(rng, B=4, T=8, D=3, F=6, r=2)
    pooled_a, argmax_a = kernels.conv_pool_forward(X, lengths, w_t, b)
    pooled_b, argmax_b = kernels._conv_pool_forward_np(X, lengths, w_t, b)
    np.testing.assert_allclose(pooled_a, pooled_b, rtol=1e-10, atol=1e-12)
    np.testing.assert_array_equal(argmax_a, argmax_b)

    grad_pooled = rng.normal(size=pooled_a.shape)
    out_a = kernels.conv_pool_backward(grad_pooled, pooled_a, argmax_a, X, w_t, 2)
    out_b = kernels._conv_pool_backward_np(grad_pooled, pooled_b, argmax_b, X, w_t, 2)
    for got, want in zip(out_a, out_b):
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_backends_agree_on_embedding_and_adam():
    rng = np.random.default_rng(14)
    grad_x = rng.normal(size=(3, 5, 4))
    indices = rng.integers(0, 7, size=(3, 5)).astype(np.int64)
    np.testing.assert_allclose(
        kernels.embedding_grad(grad_x, indices, 7),
        kernels._embedding_grad_np(grad_x, indices, 7), rtol=1e-12, atol=1e-12)

    param_a = rng.normal(size=6)
    param_b = param_a.copy()
    grad = rng.normal(size=6)
    state_a = (np.zeros(6), np.zeros(6))
    state_b = (np.zeros(6), np.zeros(6))
    kernels.adam_step(param_a, grad, *state_a, 1e-3, 0.9, 0.999, 1e-8, 1)
    kernels._adam_step_np(param_b, grad, *state_b, 1e-3, 0.9, 0.999, 1e-8, 1)
    np.testing.assert_allclose(param_a, param_b, rtol=1e-12, atol=1e-15)


def test_backends_agree_on_skipgram_epoch():
    """Same precomputed randomness in, same trained vectors out (fp32 tol)."""
    rng = np.random.default_rng(15)
    n_words, buckets, dim = 5, 8, 6
    indptr = np.array([0, 2, 4, 6, 8, 10], dtype=np.int64)
    unit_ids = rng.integers(0, n_words + buckets, size=10).astype(np.int64)
    centers = rng.integers(0, n_words, size=40).astype(np.int64)
    contexts = rng.integers(0, n_words, size=40).astype(np.int64)
    negatives = rng.integers(0, n_words, size=(40, 3)).astype(np.int64)
    vin = rng.normal(size=(n_words + buckets, dim)).astype(np.float32) * 0.1
    vout = np.zeros((n_words, dim), dtype=np.float32)
    vin_np, vout_np = vin.copy(), vout.copy()

    kernels.skipgram_epoch(vin, vout, indptr, unit_ids, centers, contexts,
                           negatives, 0.05, 0.01)
    kernels._skipgram_epoch_np(vin_np, vout_np, indptr, unit_ids, centers,
                               contexts, negatives, 0.05, 0.01)
    np.testing.assert_allclose(vin, vin_np, rtol=1e-4, atol=1e-6)
    np.testing.assert_allclose(vout, vout_np, rtol=1e-4, atol=1e-6)
