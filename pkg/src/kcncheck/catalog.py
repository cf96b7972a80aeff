"""Built-in regression charts and seeded random candidates.

Complex coordinates are realified as ``z^a = x^a + i y^a`` with the real
coordinate order ``(x1, y1, x2, y2)`` and the standard complex structure
``J d/dx = d/dy``. The quaternion structures on R^4 are left multiplication
by i, j, k (``ij = k``), which gives ``J1 J2 = J3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .definition import ChartDefinition, loads

FLAT_C2_HEADER = """\
dim 4
coords x1 y1 x2 y2
domain 1 -1 1
domain 2 -1 1
domain 3 -1 1
domain 4 -1 1
g 1 1 = "1"
g 2 2 = "1"
g 3 3 = "1"
g 4 4 = "1"
J 1 2 = "-1"
J 2 1 = "1"
J 3 4 = "-1"
J 4 3 = "1"
"""

# J1 = J is already in the header; J2, J3 as (i, j, value) with 1-based indices
QUATERNION_J2 = ((1, 3, -1), (2, 4, 1), (3, 1, 1), (4, 2, -1))
QUATERNION_J3 = ((1, 4, -1), (2, 3, -1), (3, 2, 1), (4, 1, 1))


def _flat(name: str, body: str, exclude: str = None) -> str:
    head = f"manifold {name}\n" + FLAT_C2_HEADER
    if exclude:
        head += f'exclude "{exclude}"\n'
    return head + body


def _a_lines(entries) -> str:
    return "".join(f'A {i} {j} = "{v}"\n' for i, j, v in entries)


_SOURCES = {
    "flat-c2-example15": _flat("flat-c2-example15", """\
# real part of z1 dz1 ^ conj(dz2)
theta 1 3 = "x1"
theta 2 4 = "x1"
theta 1 4 = "y1"
theta 2 3 = "-y1"
"""),
    "hyperkahler-r4": _flat("hyperkahler-r4", "candidate J2\n" + _a_lines(QUATERNION_J2)
                            + "candidate J3\n" + _a_lines(QUATERNION_J3)),
    "product-structure-c2": _flat("product-structure-c2", """\
theta 1 2 = "-1"
theta 3 4 = "1"
A 1 1 = "1"
A 2 2 = "1"
A 3 3 = "-1"
A 4 4 = "-1"
"""),
    "parallel-form-c2": _flat("parallel-form-c2", """\
theta 1 2 = "2"
theta 3 4 = "1"
"""),
    "rank2-degenerate": _flat("rank2-degenerate", """\
theta 1 2 = "x1"
""", exclude="x1^2 + y1^2"),
    "scc-nonparallel-negative": _flat("scc-nonparallel-negative", """\
# real part of z1 dz1 ^ dz2
theta 1 3 = "x1"
theta 2 4 = "-x1"
theta 1 4 = "-y1"
theta 2 3 = "-y1"
""", exclude="x1^2 + y1^2"),
    "nonclosed-negative": _flat("nonclosed-negative", """\
theta 1 2 = "x2"
"""),
}


@dataclass(frozen=True)
class Expectation:
    """Expected outcome of one check; ``check`` may also be ``kcn`` or ``class``."""

    candidate: str
    check: str
    expected: str
    citation: str


@dataclass(frozen=True)
class BuiltinEntry:
    name: str
    definition: ChartDefinition
    expectations: tuple

    @property
    def source(self) -> str:
        return _SOURCES[self.name]


def _exp(candidate, citation, **checks):
    return tuple(Expectation(candidate, k, v, citation) for k, v in checks.items())


_EX15 = ("CLAIM Example 1.5: 'Theta is a c.c., K.c.N. form' and 'not a parallel form'; "
         "realified as Re(z1 dz1 ^ conj dz2)")
_EX12 = ("CLAIM Example 1.2: 'the tensors J2, J3 are s.c.c., K.c.N. tensor fields' "
         "which are parallel forms")
_COR21 = "CLAIM Corollary 2.1: 'A is K.c.N. iff Theta is closed'; constant Theta is closed"
_EX11 = "CLAIM Example 1.1: 'Any parallel 2-form of a Kahler manifold is a K.c.N. form'"
_RANK2 = "DERIVED: brute-force check with explicit A = -x1 diag(1,1,0,0)"
_SCC = ("DERIVED: engine evaluation; a nondegenerate scc structure "
        "is K.c.N. iff it is parallel")
_NONCLOSED = "DERIVED: hand expansion d(x2 dx1^dy1) = dx2^dx1^dy1 != 0"

_EXPECTATIONS = {
    "flat-c2-example15": _exp("main", _EX15, kahler="PASS", **{"class": "cc"}, closed="PASS",
                              property1="PASS", property2="PASS", property3="PASS",
                              property4="PASS", kcn="PASS", deltaC="PASS", parallel="FAIL"),
    "hyperkahler-r4": sum((_exp(lbl, _EX12, kahler="PASS", **{"class": "scc"}, kcn="PASS",
                                parallel="PASS") for lbl in ("J2", "J3")), ()),
    "product-structure-c2": _exp("main", _COR21, kahler="PASS", **{"class": "cc"},
                                 closed="PASS", property1="PASS", kcn="PASS",
                                 orthogonal_product="PASS"),
    "parallel-form-c2": _exp("main", _EX11, kahler="PASS", **{"class": "cc"}, kcn="PASS",
                             property1="PASS", property2="PASS", property3="PASS",
                             property4="PASS", parallel="PASS"),
    "rank2-degenerate": _exp("main", _RANK2, kahler="PASS", **{"class": "cc"}, kcn="PASS",
                             rank="PASS"),
    "scc-nonparallel-negative": _exp("main", _SCC, kahler="PASS", **{"class": "scc"},
                                     closed="PASS", kcn="FAIL", parallel="FAIL",
                                     property1="FAIL", property2="FAIL", property3="FAIL",
                                     property4="FAIL", poisson_compatibility="FAIL",
                                     inverse_closed="FAIL"),
    "nonclosed-negative": _exp("main", _NONCLOSED, kahler="PASS", closed="FAIL", kcn="FAIL"),
}


class UnknownBuiltin(KeyError):
    def __str__(self):
        return f"unknown builtin {self.args[0]!r}; available: {', '.join(list_builtins())}"


def list_builtins() -> list:
    return list(_SOURCES)


@lru_cache(maxsize=None)
def get_builtin(name: str) -> BuiltinEntry:
    if name not in _SOURCES:
        raise UnknownBuiltin(name)
    return BuiltinEntry(name, loads(_SOURCES[name]), _EXPECTATIONS[name])


def observed(result: dict, candidate: str, check: str):
    """Value of ``check`` for ``candidate`` in a run_suite result, or None if not run."""
    for entry in result["candidates"]:
        if entry["candidate"] != candidate:
            continue
        if check == "kcn":
            return entry.get("kcn")
        for rep in entry["checks"]:
            if check == "class" and rep["check"] == "classify":
                return rep["details"].get("class")
            if rep["check"] == check:
                return rep["verdict"]
    return None


def expectation_mismatches(entry: BuiltinEntry, result: dict) -> list:
    """Expectations that were evaluated by ``result`` and came out differently."""
    out = []
    for e in entry.expectations:
        got = observed(result, e.candidate, e.check)
        if got is not None and got != e.expected:
            out.append((e, got))
    return out


# ------------------------------------------------------------ random candidates

# polynomials in 4 variables as {exponent tuple: coefficient}

def _monomials(nvars: int, degree: int) -> list:
    out = []
    for total in range(degree + 1):
        for exps in np.ndindex(*(total + 1,) * nvars):
            if sum(exps) == total:
                out.append(tuple(int(e) for e in exps))
    return out


def _random_poly(rng, nvars, degree, scale):
    return {m: float(np.round(rng.uniform(-scale, scale), 4)) for m in _monomials(nvars, degree)}


def _diff(poly, k):
    out = {}
    for m, c in poly.items():
        if m[k]:
            n = list(m)
            n[k] -= 1
            out[tuple(n)] = out.get(tuple(n), 0.0) + c * m[k]
    return out


def _add(*terms):
    """Linear combination of (coefficient, polynomial) pairs."""
    out = {}
    for a, p in terms:
        for m, c in p.items():
            out[m] = out.get(m, 0.0) + a * c
    return out


def _render(poly, names) -> str:
    parts = []
    for m, c in sorted(poly.items()):
        if c == 0.0:
            continue
        factors = [repr(float(c))]
        factors += [v if e == 1 else f"{v}^{e}" for v, e in zip(names, m) if e]
        parts.append("*".join(factors))
    return " + ".join(parts).replace("+ -", "- ") if parts else "0"


def _candidate_text(name, theta_polys) -> str:
    names = ("x1", "y1", "x2", "y2")
    body = "".join(f'theta {i + 1} {j + 1} = "{_render(p, names)}"\n'
                   for (i, j), p in sorted(theta_polys.items()))
    return _flat(name, body)


def random_closed_candidate(seed: int, degree: int = 2) -> ChartDefinition:
    """Flat C^2 with Theta = d(alpha) + Theta0, alpha a polynomial 1-form.

    Components of alpha have degree <= ``degree`` and Theta0 is constant, so
    Theta is closed by construction.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = [_random_poly(rng, 4, degree, 1.0) for _ in range(4)]
    theta = {}
    for i in range(4):
        for j in range(i + 1, 4):
            const = float(np.round(rng.uniform(-1.0, 1.0), 4))
            theta[(i, j)] = _add((1.0, _diff(alpha[j], i)), (-1.0, _diff(alpha[i], j)),
                                 (1.0, {(0, 0, 0, 0): const}))
    return loads(_candidate_text(f"random-closed-{seed}", theta))


_J_FLAT = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])


def random_cc_candidate(seed: int, degree: int = 2, shift: float = 4.0) -> ChartDefinition:
    """Flat C^2 with Theta = P(Xi) - shift * Omega, a J-invariant polynomial 2-form.

    ``P`` is the projector onto J-invariant 2-forms, so the candidate is
    commuting (cc). Coefficients of ``Xi`` are at most 0.5 in size, which
    keeps the shift term dominant and A invertible on the unit box.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    xi = {}
    for i in range(4):
        for j in range(i + 1, 4):
            xi[(i, j)] = _random_poly(rng, 4, degree, 0.5)
            xi[(j, i)] = _add((-1.0, xi[(i, j)]))
    for i in range(4):
        xi[(i, i)] = {}
    J = _J_FLAT
    omega = J.T  # g = identity
    theta = {}
    for i in range(4):
        for j in range(i + 1, 4):
            terms = [(0.5, xi[(i, j)])]
            for k in range(4):
                for l in range(4):
                    if J[k, i] and J[l, j]:
                        terms.append((0.5 * J[k, i] * J[l, j], xi[(k, l)]))
            terms.append((1.0, {(0, 0, 0, 0): -shift * float(omega[i, j])}))
            theta[(i, j)] = {m: c for m, c in _add(*terms).items() if c != 0.0}
    return loads(_candidate_text(f"random-cc-{seed}", theta))
