import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volspan import VolspanError
from volspan.geometry import PointSet, symmetrize
from volspan.mvee import john_decomposition, john_weights, mvee_approx, to_john_position

from oracles import random_symmetric_set

S3 = math.sqrt(3.0)
TRIANGLE = np.array([[0.0, 1.0], [-S3 / 2, -0.5], [S3 / 2, -0.5]])


def cross_polytope(d):
    return PointSet(np.vstack([np.eye(d), -np.eye(d)]))


def rel_err(A, B):
    return np.linalg.norm(A - B, 2) / np.linalg.norm(B, 2)


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_cross_polytope_gives_unit_ball(d):
    E = mvee_approx(cross_polytope(d), 1e-6)
    assert rel_err(E.shape, np.eye(d)) <= 1e-6
    assert E.log_volume == pytest.approx(0.5 * np.linalg.slogdet(E.shape)[1], abs=1e-8)


def test_scaled_axes():
    K = PointSet([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    E = mvee_approx(K, 1e-6)
    assert rel_err(E.shape, np.diag([4.0, 1.0])) <= 1e-6
    Kj, T = to_john_position(K, 1e-6)
    assert np.allclose(Kj.points, [[1, 0], [-1, 0], [0, 1], [0, -1]], atol=1e-6)
    assert np.allclose(T, np.diag([0.5, 1.0]), atol=1e-6)


def test_non_symmetric_input_is_symmetrised():
    E = mvee_approx(PointSet([[1.0, 0.0], [0.0, 1.0]]), 1e-6)
    assert rel_err(E.shape, np.eye(2)) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_random_volume_matches_tight_run(seed):
    rng = np.random.default_rng(seed)
    K = PointSet(rng.standard_normal((50, 3)))
    loose = mvee_approx(K, 1e-3)
    tight = mvee_approx(K, 1e-9)
    assert abs(loose.log_volume - tight.log_volume) <= math.log(1 + 1e-3)
    assert loose.norms(symmetrize(K).points).max() <= 1 + 1e-9


def test_contains_every_point():
    rng = np.random.default_rng(3)
    K = PointSet(random_symmetric_set(rng, 5, 60))
    E = mvee_approx(K, 1e-6)
    assert E.norms(K.points).max() <= 1 + 1e-9


def test_degenerate_span():
    K = PointSet([[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])
    with pytest.raises(VolspanError) as ei:
        mvee_approx(K, 1e-6)
    assert ei.value.code == "degenerate_span" and ei.value.details["rank"] == 2


def test_bad_eps():
    with pytest.raises(VolspanError):
        mvee_approx(cross_polytope(2), 0.0)


def test_john_position_already_ball():
    _, T = to_john_position(cross_polytope(3), 1e-6)
    assert np.allclose(T, np.eye(3), atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_john_position_max_norm(seed):
    rng = np.random.default_rng(100 + seed)
    K = PointSet(random_symmetric_set(rng, 4, 40))
    eps = 1e-6
    Kj, _ = to_john_position(K, eps)
    m = np.linalg.norm(Kj.points, axis=1).max()
    assert 1 - 2 * eps <= m <= 1 + 2 * eps
    # the image's own ellipsoid is the unit ball
    assert rel_err(mvee_approx(Kj, 1e-6).shape, np.eye(4)) <= 1e-5


def test_john_weights_cross_polytope():
    cert = john_weights(cross_polytope(2), 1e-6)
    assert np.allclose(cert.weights, 0.5, atol=1e-9)
    assert cert.residual <= 1e-12


def check_certificate(Kj, cert, tol=1e-6):
    d = Kj.dim
    assert np.all(cert.weights >= 0)
    assert cert.weight_sum <= d + tol
    assert cert.residual <= tol
    assert cert.recompute_residual() == pytest.approx(cert.residual, abs=1e-12)
    balance = cert.weights @ Kj.points
    assert np.linalg.norm(balance) <= 1e-9


def test_john_triangle():
    Kj, cert = john_decomposition(PointSet(TRIANGLE))
    check_certificate(Kj, cert)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_john_weights_property(d, seed):
    rng = np.random.default_rng(seed)
    n_half = int(rng.integers(d, 6 * d + 2))
    Kj, cert = john_decomposition(PointSet(random_symmetric_set(rng, d, n_half)))
    check_certificate(Kj, cert)


def test_john_weights_infeasible():
    # only +-[0.3, 0.4] carries off-diagonal mass, so sum c x x^T = I has no solution
    K = PointSet([[1.0, 0.0], [-1.0, 0.0], [0.3, 0.4], [-0.3, -0.4]])
    with pytest.raises(VolspanError) as ei:
        john_weights(K, 1e-6)
    assert ei.value.code == "decomposition_failed"
    assert ei.value.details["residual"] > 1e-6
