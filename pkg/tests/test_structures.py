import numpy as np
import pytest

from kcncheck import catalog
from kcncheck import geometry as geo
from kcncheck import structures as st
from kcncheck.definition import loads
from kcncheck.structures import StructureCandidate

import oracles

R2 = """dim 2
coords x y
g 1 1 = "{c}"
g 2 2 = "{c}"
J 1 2 = "-1"
J 2 1 = "1"
theta 1 2 = "1"
"""

J1 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
J2 = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
J3 = J1 @ J2
PTS = np.random.default_rng(0).uniform(-1, 1, (30, 4))


def _fields(name):
    d = catalog.get_builtin(name).definition
    cf = d.chart().fields(PTS)
    return d, cf


def _cand(cf, d, label="main"):
    return cf.candidate(d.candidate(label))


def test_quaternion_identities():
    for M in (J1, J2, J3):
        np.testing.assert_array_equal(M @ M, -np.eye(4))
    np.testing.assert_array_equal(J2 @ J3, J1)
    np.testing.assert_array_equal(J3 @ J1, J2)


def test_omega_r2_and_scaling():
    cf = loads(R2.format(c=1)).chart().fields(np.zeros((1, 2)))
    np.testing.assert_array_equal(cf.omega.v[0], [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(cf.pi.v[0], [[0, 1], [-1, 0]])
    cf3 = loads(R2.format(c=3)).chart().fields(np.zeros((1, 2)))
    np.testing.assert_allclose(cf3.omega.v, 3 * cf.omega.v)


def test_omega_hyperkahler():
    _, cf = _fields("hyperkahler-r4")
    np.testing.assert_array_equal(cf.omega.v, np.broadcast_to(J1.T, (30, 4, 4)))


def test_pi_raises_omega_indices():
    rng = np.random.default_rng(1)
    for name in catalog.list_builtins():
        _, cf = _fields(name)
        g, om, pi = cf.g.v[0], cf.omega.v[0], cf.pi.v[0]
        ginv = np.linalg.inv(g)
        for a, b in rng.normal(size=(50, 2, 4)):
            # Pi(a, b) = Omega(sharp_g a, sharp_g b)
            assert abs(a @ pi @ b - (ginv @ a) @ om @ (ginv @ b)) < 1e-10
        # Pi = sharp_g Omega (raise both indices)
        np.testing.assert_allclose(pi, ginv @ om @ ginv.T, atol=1e-12)


def test_a_from_theta_examples():
    d, cf = _fields("rank2-degenerate")
    A = _cand(cf, d).A.v
    expect = -PTS[:, 0, None, None] * np.diag([1.0, 1, 0, 0])
    np.testing.assert_allclose(A, expect, atol=1e-15)
    # Theta = -Omega gives A = Id
    th = geo.JetField(-cf.omega.v, -cf.omega.d, None, (0, 2))
    np.testing.assert_allclose(st.a_from_theta(cf.pi, th).v, np.broadcast_to(np.eye(4), (30, 4, 4)))


def test_theta_from_a_hyperkahler():
    d, cf = _fields("hyperkahler-r4")
    om2, om3 = J2.T, J3.T
    np.testing.assert_allclose(_cand(cf, d, "J2").theta.v[0], -om3, atol=1e-12)
    np.testing.assert_allclose(_cand(cf, d, "J3").theta.v[0], om2, atol=1e-12)


def test_round_trip_a_theta():
    d = catalog.random_cc_candidate(3)
    cf = d.chart().fields(PTS)
    c = _cand(cf, d)
    back = st.a_from_theta(cf.pi, st.theta_from_a(cf.omega, c.A))
    np.testing.assert_allclose(back.v, c.A.v, atol=1e-10)
    np.testing.assert_allclose(back.d, c.A.d, atol=1e-10)


def test_not_omega_skew():
    _, cf = _fields("parallel-form-c2")
    A = np.zeros((4, 4))
    A[0, 0] = 1.0
    Af = geo.constant_field(A, (30,), (1, 1))
    with pytest.raises(st.NotOmegaSkew) as info:
        st.theta_from_a(cf.omega, Af)
    assert info.value.residual == pytest.approx(1.0)


def test_tilde_theta_two_ways():
    for name in catalog.list_builtins():
        d, cf = _fields(name)
        for cand in d.structure_candidates():
            c = cf.candidate(cand)
            alt = st.tilde_theta_from_a(cf.omega.v, c.A.v)
            np.testing.assert_allclose(c.tilde.v, alt, atol=1e-10)
    d, cf = _fields("hyperkahler-r4")
    c = _cand(cf, d, "J2")
    np.testing.assert_allclose(c.tilde.v[0], -(J2.T @ J1.T @ J2), atol=1e-12)
    zero = geo.constant_field(np.zeros((4, 4)), (30,), (0, 2))
    assert not st.tilde_theta(zero, cf.pi).v.any()


def test_projectors():
    om1, om3 = J1.T, J3.T
    p, q = st.projectors(om1, J1)
    np.testing.assert_allclose(p, om1)
    assert not q.any()
    p, q = st.projectors(-om3, J1)
    assert not p.any()
    np.testing.assert_allclose(q, -om3)
    p, q = st.projectors(om1 - om3, J1)
    np.testing.assert_allclose(p, om1, atol=1e-12)
    np.testing.assert_allclose(q, -om3, atol=1e-12)
    rng = np.random.default_rng(2)
    for t in rng.normal(size=(20, 4, 4)):
        p, q = st.projectors(t, J1)
        assert np.abs(p + q - t).max() < 1e-12
        assert np.abs(st.projectors(p, J1)[1]).max() < 1e-12
        assert np.abs(st.projectors(q, J1)[0]).max() < 1e-12
        np.testing.assert_allclose(st.projectors(p, J1)[0], p, atol=1e-12)


def test_efbc():
    d, cf = _fields("hyperkahler-r4")
    assert not any(np.abs(x).max() for x in _cand(cf, d, "J2").efbc)
    d, cf = _fields("flat-c2-example15")
    c = _cand(cf, d)
    E, F, B, C = c.efbc
    assert np.abs(E).max() > 0.5
    # F_A(X, Y) = E_A(AX, Y) evaluated directly at each point
    for k in range(5):
        A = c.A.v[k]
        for a in range(4):
            for b in range(4):
                direct = sum(A[m, a] * E[k, :, m, b] for m in range(4))
                assert np.abs(F[k, :, a, b] - direct).max() < 1e-10
    # E from the finite-difference derivative of A on the flat chart
    g, J = oracles.chart_fns(d)
    Af = oracles.a_fn(g, J, oracles.table_fn(d.candidate("main").theta))
    ref = np.einsum("aib->iab", oracles.fd_grad(Af, PTS[0]))
    np.testing.assert_allclose(E[0], ref, atol=1e-8)


def test_classify():
    d, cf = _fields("hyperkahler-r4")
    labels, _ = st.classify_cc_scc(_cand(cf, d, "J2").A.v, cf.J.v)
    assert set(labels) == {"scc"}
    d, cf = _fields("flat-c2-example15")
    labels, _ = st.classify_cc_scc(_cand(cf, d).A.v, cf.J.v)
    assert set(labels) == {"cc"}
    labels, zero = st.classify_cc_scc(np.eye(4), J1)
    assert labels == "cc" and not zero
    labels, zero = st.classify_cc_scc(np.zeros((4, 4)), J1)
    assert labels == "cc" and zero


def test_metric_theta_relation():
    # g(AX, Y) = -Theta(Y, JX) for cc, +Theta(Y, JX) for scc
    for name in catalog.list_builtins():
        d, cf = _fields(name)
        for cand in d.structure_candidates():
            c = cf.candidate(cand)
            labels, _ = st.classify_cc_scc(c.A.v, cf.J.v)
            if len(set(labels)) != 1 or labels[0] == "neither":
                continue
            sign = -1.0 if labels[0] == "cc" else 1.0
            lhs = np.einsum("...ki,...kj->...ij", c.A.v, cf.g.v)        # g(A d_i, d_j)
            rhs = sign * np.einsum("...jk,...ki->...ij", c.theta.v, cf.J.v)  # Theta(d_j, J d_i)
            assert np.abs(lhs - rhs).max() < 1e-9, name


def test_theta_from_a_both_slots():
    for name in catalog.list_builtins():
        d, cf = _fields(name)
        for cand in d.structure_candidates():
            c = cf.candidate(cand)
            first = -np.einsum("...ki,...kj->...ij", c.A.v, cf.omega.v)
            second = -np.einsum("...ik,...kj->...ij", cf.omega.v, c.A.v)
            np.testing.assert_allclose(c.theta.v, first, atol=1e-10)
            np.testing.assert_allclose(c.theta.v, second, atol=1e-10)


def test_both_given_must_agree():
    d = catalog.get_builtin("product-structure-c2").definition
    cf = d.chart().fields(PTS)
    c = _cand(cf, d)
    assert c.omega_skew.max() < 1e-12
    bad = StructureCandidate("bad", d.candidate("main").theta,
                             catalog.get_builtin("hyperkahler-r4").definition.candidate("J2").A)
    assert cf.candidate(bad).omega_skew.max() > 0.5


def test_c_from_inverse_b_sign():
    # differentiating A A^-1 = Id gives C_A(X, Y) = -A(B_{A^-1}(AX, AY))
    for seed in range(3):
        d = catalog.random_cc_candidate(seed)
        c = d.chart().fields(PTS).candidate(d.candidate("main"))
        Binv = np.swapaxes(c.nabla_A_inv, -1, -2)
        Binv = 0.5 * (Binv - np.swapaxes(Binv, -1, -2))
        A = c.A.v
        rhs = np.einsum("...ik,...kcd,...ca,...db->...iab", A, Binv, A, A)
        C = c.efbc[3]
        assert np.abs(C + rhs).max() < 1e-8
        assert np.abs(C - rhs).max() > 1e-2


def test_theta_prime_two_formulas():
    d, cf = _fields("product-structure-c2")
    c = _cand(cf, d)
    direct = -np.einsum("...ki,...kj->...ij", c.A_inv.v, cf.omega.v)
    np.testing.assert_allclose(c.theta_prime.v, direct, atol=1e-12)
    # sharp_Psi = A^-1 o sharp_Pi forces sharp_Psi o flat_Theta = A^-1 A = Id
    M = np.einsum("...ji,...kj->...ik", c.theta_poisson.v, c.theta.v)
    np.testing.assert_allclose(M, np.broadcast_to(np.eye(4), M.shape), atol=1e-12)
    sharp = np.einsum("...ik,...jk->...ij", c.A_inv.v, cf.pi.v)
    np.testing.assert_allclose(np.swapaxes(c.theta_poisson.v, -1, -2), sharp, atol=1e-12)


def test_singular_a_inverse():
    d, cf = _fields("rank2-degenerate")
    with pytest.raises(st.tensor.SingularEndomorphism):
        _ = _cand(cf, d).A_inv


def test_chart_invariant_errors():
    d = catalog.get_builtin("parallel-form-c2").definition
    ch = d.chart()
    with pytest.raises(st.ChartInvariantError):
        st.KahlerChart("odd", ch.coords[:3], [r[:3] for r in ch.g[:3]], [r[:3] for r in ch.J[:3]],
                       ch.domain[:3])
    with pytest.raises(ValueError):
        StructureCandidate("empty")
