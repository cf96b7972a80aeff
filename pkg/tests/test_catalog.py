import numpy as np
import pytest

from kcncheck import catalog
from kcncheck import geometry as geo
from kcncheck import structures as st
from kcncheck import verdicts as v

NAMES = ["flat-c2-example15", "hyperkahler-r4", "product-structure-c2", "parallel-form-c2",
         "rank2-degenerate", "scc-nonparallel-negative", "nonclosed-negative"]


def test_list_and_lookup():
    assert catalog.list_builtins() == NAMES
    with pytest.raises(catalog.UnknownBuiltin, match="nope"):
        catalog.get_builtin("nope")


def test_hyperkahler_shape():
    e = catalog.get_builtin("hyperkahler-r4")
    assert e.definition.dim == 4
    assert all(x.is_constant() for _, x in e.definition.g)
    J1 = np.array([[float(x.value(np.zeros(4))) for x in row] for row in e.definition.chart().J])
    A = {c.label: np.array([[float(x.value(np.zeros(4))) for x in row] for row in c.A])
         for c in e.definition.structure_candidates()}
    np.testing.assert_array_equal(J1 @ A["J2"], A["J3"])


def test_every_expectation_has_a_citation():
    for name in NAMES:
        for e in catalog.get_builtin(name).expectations:
            assert e.citation.startswith(("CLAIM", "DERIVED"))


def test_chart_invariants_all_builtins():
    for name in NAMES:
        rep = v.check_kahler(catalog.get_builtin(name).definition.chart(),
                             plan=v.SamplePlan(), tol=1e-10)
        assert rep.verdict == v.PASS, (name, rep.details)


def test_flat_c2_realification():
    # Re(z1 dz1 ^ conj dz2) expanded by hand
    d = catalog.get_builtin("flat-c2-example15").definition
    p = np.array([0.3, -0.7, 0.2, 0.9])
    th = np.array([[float(x.value(p)) for x in row] for row in d.candidate("main").theta])
    x1, y1 = p[:2]
    z1 = x1 + 1j * y1
    dz = [np.array([1, 1j, 0, 0]), np.array([0, 0, 1, 1j])]
    form = z1 * (np.outer(dz[0], dz[1].conj()) - np.outer(dz[1].conj(), dz[0]))
    np.testing.assert_allclose(th, form.real, atol=1e-15)


def test_scc_negative_realification():
    d = catalog.get_builtin("scc-nonparallel-negative").definition
    p = np.array([0.3, -0.7, 0.2, 0.9])
    th = np.array([[float(x.value(p)) for x in row] for row in d.candidate("main").theta])
    z1 = p[0] + 1j * p[1]
    dz = [np.array([1, 1j, 0, 0]), np.array([0, 0, 1, 1j])]
    form = z1 * (np.outer(dz[0], dz[1]) - np.outer(dz[1], dz[0]))
    np.testing.assert_allclose(th, form.real, atol=1e-15)


def test_random_closed_candidates_are_closed():
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 4))
    for seed in range(5):
        d = catalog.random_closed_candidate(seed)
        c = d.chart().fields(pts).candidate(d.candidate("main"))
        assert np.abs(geo.exterior_derivative(c.theta)).max() < 1e-12
        assert d == catalog.random_closed_candidate(seed)


def test_random_cc_candidates_are_cc_and_invertible():
    pts = np.random.default_rng(1).uniform(-1, 1, (50, 4))
    for seed in range(10):
        d = catalog.random_cc_candidate(seed)
        c = d.chart().fields(pts).candidate(d.candidate("main"))
        labels, _ = st.classify_cc_scc(c.A.v, d.chart().fields(pts).J.v)
        assert set(labels) == {"cc"}
        assert np.abs(np.linalg.det(c.A.v)).min() > 1.0


@pytest.mark.parametrize("name", NAMES)
def test_expectations_reproduced(name):
    """Regression gate: every catalog expectation matches the full suite."""
    e = catalog.get_builtin(name)
    result = v.run_suite(e.definition.chart(), e.definition.structure_candidates(), suite="all")
    mismatches = catalog.expectation_mismatches(e, result)
    assert not mismatches, [(m.candidate, m.check, m.expected, got) for m, got in mismatches]
