import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmg.testkit import dense_forward_difference, dense_matrix_of
from fbmg.tv_ops import GRADIENT_NORM_SQ, divergence_adjoint, gradient, operator_norm_sq, tv_norm


def test_gradient_of_constant_is_zero():
    assert np.all(gradient(np.full((5, 4), 3.0)) == 0)


def test_gradient_neumann_boundary():
    y = np.arange(12.0).reshape(3, 4)
    g = gradient(y)
    assert np.all(g[0, -1] == 0) and np.all(g[1, :, -1] == 0)
    assert np.allclose(g[0, :-1], 4.0) and np.allclose(g[1, :, :-1], 1.0)


def test_gradient_matches_dense_stencil_4x4():
    G = dense_matrix_of(gradient, (4, 4), (2, 4, 4))
    assert G.shape == (32, 16)
    assert np.array_equal(G, dense_forward_difference(4, 4))


def test_gradient_rows_hand_checked():
    G = dense_forward_difference(4, 4)
    # row difference at pixel (1, 2): y[2, 2] - y[1, 2]
    row = np.zeros(16)
    row[2 * 4 + 2], row[1 * 4 + 2] = 1, -1
    assert np.array_equal(G[1 * 4 + 2], row)
    # column difference at the last column vanishes
    assert not G[16 + 3].any()


def test_divergence_adjoint_is_transpose():
    G = dense_forward_difference(5, 3)
    D = dense_matrix_of(divergence_adjoint, (2, 5, 3), (5, 3))
    assert np.allclose(D, G.T, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_adjointness_random_shapes(rows, cols, seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((rows, cols))
    x = rng.standard_normal((2, rows, cols))
    lhs = np.vdot(gradient(y), x)
    rhs = np.vdot(y, divergence_adjoint(x))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs)) * rows * cols


def test_operator_norm_bound():
    for shape in [(4, 4), (16, 16), (9, 5)]:
        assert operator_norm_sq(shape) <= GRADIENT_NORM_SQ
    # the bound is approached on larger grids; largest eigenvalue of the
    # 1-D Neumann difference Laplacian is 2 + 2 cos(pi / n)
    exact = 2 * (2 + 2 * np.cos(np.pi / 32))
    assert operator_norm_sq((32, 32), n_iter=3000) == pytest.approx(exact, rel=1e-4)


def test_tv_norm_of_ramp():
    y = np.tile(np.arange(4.0), (4, 1))
    assert tv_norm(gradient(y)) == pytest.approx(12.0)
