import itertools

import numpy as np
import pytest

from kcncheck import catalog
from kcncheck.tensor import (DimensionMismatch, SingularEndomorphism, TensorValue, alt12,
                             c_operator, flat_form, invert_endomorphism, rank_with_kernel,
                             sharp_bivector, sharp_g, wedge, wedge2)

from oracles import chart_fns, omega_fn, pi_fn

PI2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_sharp_bivector_basis():
    # beta(sharp alpha) = Pi(alpha, beta) for basis covectors
    np.testing.assert_array_equal(sharp_bivector(PI2, [1.0, 0.0]), [0.0, 1.0])
    np.testing.assert_array_equal(sharp_bivector(PI2, [0.0, 1.0]), [-1.0, 0.0])
    np.testing.assert_array_equal(sharp_bivector(np.zeros((2, 2)), [3.0, 4.0]), [0.0, 0.0])
    for a, b in itertools.product(np.eye(2), repeat=2):
        assert b @ sharp_bivector(PI2, a) == a @ PI2 @ b


def test_flat_form():
    np.testing.assert_array_equal(flat_form(PI2, [1.0, 0.0]), [0.0, 1.0])
    np.testing.assert_array_equal(flat_form(np.zeros((2, 2)), [1.0, 2.0]), [0.0, 0.0])
    np.testing.assert_array_equal(flat_form(np.eye(3), [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_sharp_g():
    np.testing.assert_array_equal(sharp_g(np.eye(2), [1.0, 0.0]), [1.0, 0.0])
    g = np.diag([1.0, 4.0])  # diag(1, x^2) at x = 2
    np.testing.assert_allclose(sharp_g(np.linalg.inv(g), [0.0, 1.0]), [0.0, 0.25])
    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 4))
    g = m @ m.T + 4 * np.eye(4)
    for X in rng.normal(size=(10, 4)):
        assert np.abs(sharp_g(np.linalg.inv(g), flat_form(g, X)) - X).max() < 1e-12


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        sharp_bivector(np.eye(3), [1.0, 0.0])
    with pytest.raises(DimensionMismatch):
        TensorValue(np.zeros((2, 3)), 1, 1)


def test_tensor_value():
    t = TensorValue(PI2, 2, 0, antisymmetric=True)
    assert t.dim == 2 and t.valence == (2, 0)
    np.testing.assert_array_equal(np.asarray(t), PI2)
    with pytest.raises(ValueError):
        TensorValue(np.eye(2), 0, 2, antisymmetric=True)


def test_invert_endomorphism():
    np.testing.assert_array_equal(invert_endomorphism(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(invert_endomorphism(np.diag([2.0, -1.0])), np.diag([0.5, -1.0]))
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(invert_endomorphism(J), -J)
    with pytest.raises(SingularEndomorphism):
        invert_endomorphism(np.diag([1.0, 0.0]))


def _shuffle_oracle(a, b, X):
    """Sum over all 4! orderings with the 1/(2!2!) normalisation."""
    total = 0.0
    for perm in itertools.permutations(range(4)):
        sign = np.linalg.det(np.eye(4)[list(perm)])
        Y = [X[k] for k in perm]
        total += sign * (Y[0] @ a @ Y[1]) * (Y[2] @ b @ Y[3])
    return total / 4.0


def _form(pairs, n=4):
    t = np.zeros((n, n))
    for i, j, v in pairs:
        t[i, j] += v
        t[j, i] -= v
    return t


def test_wedge2_examples():
    a, b = _form([(0, 1, 1.0)]), _form([(2, 3, 1.0)])
    assert wedge2(a, b)[0, 1, 2, 3] == 1.0
    om = a + b
    assert wedge2(om, om)[0, 1, 2, 3] == 2.0
    assert not wedge2(_form([(0, 1, 1.0)], 3), _form([(1, 2, 1.0)], 3)).any()


def test_wedge2_matches_oracle_and_is_alternating():
    rng = np.random.default_rng(5)
    a = _form([(i, j, rng.normal()) for i in range(4) for j in range(i + 1, 4)])
    b = _form([(i, j, rng.normal()) for i in range(4) for j in range(i + 1, 4)])
    w = wedge2(a, b)
    E = np.eye(4)
    for idx in itertools.product(range(4), repeat=4):
        assert w[idx] == pytest.approx(_shuffle_oracle(a, b, [E[k] for k in idx]), abs=1e-12)
    for axes in itertools.combinations(range(4), 2):
        assert np.abs(w + np.swapaxes(w, *axes)).max() < 1e-12


def test_wedge_one_form_two_form():
    x = np.array([1.0, 0.0, 0.0, 0.0])
    w = wedge(x, 1, _form([(1, 2, 1.0)]), 2)
    assert w[0, 1, 2] == 1.0 and w[1, 0, 2] == -1.0 and w[1, 2, 0] == 1.0


def test_alt12():
    rng = np.random.default_rng(2)
    S = rng.normal(size=(3, 3, 3))
    S = S + np.swapaxes(S, 1, 2)
    assert not alt12(S).any()
    Aa = rng.normal(size=(3, 3, 3))
    Aa = Aa - np.swapaxes(Aa, 1, 2)
    np.testing.assert_allclose(alt12(Aa), Aa)
    T = np.zeros((2, 2, 2))
    T[:, 0, 1] = [1.0, 2.0]
    np.testing.assert_allclose(alt12(T)[:, 0, 1], [0.5, 1.0])
    np.testing.assert_allclose(alt12(T)[:, 1, 0], [-0.5, -1.0])


def test_rank_with_kernel():
    r, ker, im = rank_with_kernel(np.eye(4))
    assert r == 4 and ker.shape == (4, 0) and im.shape == (4, 4)
    r, ker, im = rank_with_kernel(np.diag([1.0, 1.0, 0.0, 0.0]))
    assert r == 2
    np.testing.assert_allclose(np.abs(ker.T @ ker), np.eye(2), atol=1e-12)
    assert np.abs(ker[:2]).max() < 1e-12  # spanned by e3, e4
    r, ker, _ = rank_with_kernel(np.zeros((4, 4)))
    assert r == 0 and ker.shape == (4, 4)


def test_rank_of_rank2_builtin_candidate():
    d = catalog.get_builtin("rank2-degenerate").definition
    g, J = chart_fns(d)
    pi = pi_fn(g, J)
    rng = np.random.default_rng(9)
    for p in rng.uniform(-1, 1, (20, 4)):
        theta = np.zeros((4, 4))
        theta[0, 1], theta[1, 0] = p[0], -p[0]
        A = pi(p) @ theta
        np.testing.assert_allclose(A, -p[0] * np.diag([1.0, 1.0, 0.0, 0.0]), atol=1e-14)
        r, ker, _ = rank_with_kernel(A)
        assert r == 2 == np.linalg.matrix_rank(A)
        assert np.linalg.norm(A @ ker, axis=0).max() < 1e-7


def test_sharp_pi_flat_omega_is_minus_identity_on_catalog():
    for name in catalog.list_builtins():
        d = catalog.get_builtin(name).definition
        g, J = chart_fns(d)
        om, pi = omega_fn(g, J), pi_fn(g, J)
        for p in np.random.default_rng(1).uniform(-1, 1, (10, 4)):
            # sharp_Pi(flat_Omega X) = -X as matrices: Pi^T Omega^T X
            M = np.einsum("ji,kj->ik", pi(p), om(p))
            np.testing.assert_allclose(M, -np.eye(4), atol=1e-10)


def test_c_operator():
    J = np.array([[0.0, -1.0, 0, 0], [1.0, 0, 0, 0], [0, 0, 0, -1.0], [0, 0, 1.0, 0]])
    om = J.T
    np.testing.assert_allclose(c_operator(om, J), om)
    rng = np.random.default_rng(4)
    w = _form([(i, j, rng.normal()) for i in range(4) for j in range(i + 1, 4)])
    np.testing.assert_allclose(c_operator(c_operator(w, J), J), w, atol=1e-14)
    J2 = np.array([[0, 0, -1.0, 0], [0, 0, 0, 1.0], [1.0, 0, 0, 0], [0, -1.0, 0, 0]])
    J3 = J @ J2
    om3 = J3.T
    np.testing.assert_allclose(c_operator(-om3, J), om3)


def test_c_operator_batched_and_jet_layout():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    Jb = np.broadcast_to(J, (5, 2, 2))
    w = np.random.default_rng(0).normal(size=(3, 5, 2, 2))
    out = c_operator(w, Jb, 2)
    np.testing.assert_allclose(out[1, 2], J.T @ w[1, 2] @ J)
