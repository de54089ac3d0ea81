import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dbsi.crossrelation import (
    LocalCRMatrix,
    batch_oracle_estimate,
    cr_instantaneous,
    global_cr_accumulate,
    global_cr_matrix,
    local_cr_update,
)
from dbsi.metrics import npm
from dbsi.signals import all_frames, generate_channels, generate_stream


def pairwise_error_oracle(X, h):
    """Independent of the module: squared cross-relation errors over unordered pairs."""
    k, L = X.shape
    H = h.reshape(k, L)
    total = 0.0
    for p in range(k):
        for q in range(p + 1, k):
            e = np.dot(X[p], H[q]) - np.dot(X[q], H[p])
            total += e * e
    return total


def test_two_unit_frames():
    X = np.zeros((2, 3))
    X[:, 0] = 1.0
    h = np.array([0.3, 1.0, 2.0, -0.7, 5.0, 6.0])
    assert h @ cr_instantaneous(X) @ h == pytest.approx((h[3] - h[0]) ** 2)


def test_single_node_is_zero():
    assert not cr_instantaneous(np.ones((1, 4))).any()


def test_mapping_input_and_mismatch():
    frames = {2: np.ones(3), 0: np.arange(3.0)}
    Q = cr_instantaneous(frames, [0, 2])
    assert np.array_equal(Q, cr_instantaneous(np.vstack([np.arange(3.0), np.ones(3)])))
    with pytest.raises(ValueError):
        cr_instantaneous({0: np.ones(3), 1: np.ones(4)})


def test_quadratic_form_identity_100_draws():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k, L = rng.integers(1, 6), rng.integers(1, 9)
        X = rng.standard_normal((k, L))
        h = rng.standard_normal(k * L)
        oracle = pairwise_error_oracle(X, h)
        assert h @ cr_instantaneous(X) @ h == pytest.approx(oracle, rel=1e-9, abs=1e-12)


@given(arrays(np.float64, (3, 4), elements=st.floats(-10, 10)))
def test_instantaneous_is_symmetric_psd(X):
    Q = cr_instantaneous(X)
    assert np.array_equal(Q, Q.T)
    assert np.min(np.linalg.eigvalsh(Q)) >= -1e-9 * max(1.0, np.abs(Q).max())


def test_local_update_limits(rng):
    P = np.eye(6)
    X = rng.standard_normal((2, 3))
    assert np.array_equal(local_cr_update(P, X, 1.0), P)
    Q = cr_instantaneous(X)
    assert np.allclose(local_cr_update(P, X, 1e-12), Q, atol=1e-10)
    with pytest.raises(ValueError):
        local_cr_update(P, X, 0.0)
    with pytest.raises(ValueError):
        local_cr_update(P, X, 1.5)


def test_local_update_geometric_convergence(rng):
    X = rng.standard_normal((3, 2))
    Q = cr_instantaneous(X)
    P0 = 2.0 * np.eye(6)
    lam = 0.9
    P = P0
    for n in range(1, 60):
        P = local_cr_update(P, X, lam)
        # closed form of the geometric series
        assert np.allclose(P, lam**n * P0 + (1 - lam**n) * Q, atol=1e-12)


def test_local_cr_matrix_object(rng):
    cr = LocalCRMatrix(owner=1, neighborhood=(0, 1, 2), L=2, lam=0.5, eps=1e-6)
    assert np.array_equal(cr.P, 1e-6 * np.eye(6))
    X = rng.standard_normal((3, 2))
    cr.update(X)
    assert np.allclose(cr.P, 0.5e-6 * np.eye(6) + 0.5 * cr_instantaneous(X))
    assert cr.block_of(2) == slice(4, 6)
    for _ in range(200):
        cr.update(rng.standard_normal((3, 2)))
        assert np.array_equal(cr.P, cr.P.T)
    # bounded trace for bounded input power
    assert np.trace(cr.P) < 2 * 2 * 3 * 20


def test_global_accumulate_matches_batch(rng):
    F = rng.standard_normal((25, 3, 4))
    R = None
    for t in range(25):
        R = global_cr_accumulate(R, F[t])
    assert np.allclose(R, global_cr_matrix(F), atol=1e-10)
    h = rng.standard_normal(12)
    oracle = sum(pairwise_error_oracle(F[t], h) for t in range(25))
    assert h @ R @ h == pytest.approx(oracle, rel=1e-9)
    assert np.array_equal(global_cr_accumulate(R, np.zeros((3, 4))), R)


def test_true_channel_in_null_space_noise_free():
    cs = generate_channels(4, 6, seed=2)
    stream = generate_stream(cs, 600, 6, snr_db=math.inf, seed=3)
    R = global_cr_matrix(all_frames(stream, 6))
    h = cs.stacked
    assert h @ R @ h <= 1e-9 * np.linalg.norm(R, 2) * (h @ h)


def test_batch_oracle_identity_is_degenerate():
    h, degenerate = batch_oracle_estimate(np.eye(4))
    assert degenerate
    assert np.linalg.norm(h) == pytest.approx(1.0)
    h2, _ = batch_oracle_estimate(np.eye(4))
    assert np.array_equal(h, h2)


def test_batch_oracle_scale_invariance_and_sign():
    cs = generate_channels(3, 4, seed=0)
    stream = generate_stream(cs, 800, 4, snr_db=20.0, seed=1)
    F = all_frames(stream, 4)
    h1, _ = batch_oracle_estimate(global_cr_matrix(F))
    h2, _ = batch_oracle_estimate(global_cr_matrix(3.0 * F))
    assert np.allclose(h1, h2, atol=1e-10)
    assert h1[np.flatnonzero(np.abs(h1) > 1e-14)[0]] > 0


def test_batch_oracle_noise_free_identification():
    cs = generate_channels(5, 16, seed=4)
    stream = generate_stream(cs, 4000, 16, snr_db=math.inf, seed=5)
    h, degenerate = batch_oracle_estimate(global_cr_matrix(all_frames(stream, 16)))
    assert not degenerate
    assert npm(cs.stacked, h, "conventional") < -60
