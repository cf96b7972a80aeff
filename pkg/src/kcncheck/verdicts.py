"""Seeded sampling and check suites.

Every check evaluates a residual at each accepted sample point, divides it by
``max(1, |Theta|, |A|)`` at that point (``max(1, |g|, |J|)`` for chart checks)
and compares the largest value against the tolerance. Sample points are
drawn from numpy's PCG64 generator, so a (definition, plan) pair always
yields the same points in the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import geometry as geo
from . import structures as st
from . import tensor
from .expr import Expression, ExprError
from .structures import KahlerChart, StructureCandidate

PASS, FAIL, MIXED = "PASS", "FAIL", "MIXED"
NOT_APPLICABLE, DEGENERATE = "NOT_APPLICABLE", "DEGENERATE"

DEFAULT_TOL = 1e-8
DEFAULT_GUARD = 0.05

CHARACTERIZATIONS = ("property1", "property2", "property3", "property4")


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplePlan:
    """How to draw sample points; ``None`` fields fall back to the chart's own."""

    count: int = 128
    seed: int = 42
    domain: Optional[tuple] = None
    exclusion: Optional[Expression] = None
    guard: float = DEFAULT_GUARD
    max_rejections: int = 100_000

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("sample count must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.domain is not None:
            object.__setattr__(self, "domain", tuple(tuple(map(float, b)) for b in self.domain))


@lru_cache(maxsize=64)
def sample_points(chart: KahlerChart, plan: SamplePlan) -> np.ndarray:
    """Accepted sample points, shape (count, dim)."""
    domain = np.asarray(plan.domain if plan.domain is not None else chart.domain, dtype=float)
    exclusion = plan.exclusion if plan.exclusion is not None else chart.exclusion
    lo, hi = domain[:, 0], domain[:, 1]
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    accepted = []
    have = rejected = 0
    while have < plan.count:
        batch = lo + (hi - lo) * rng.random((plan.count, chart.dim))
        if exclusion is not None:
            keep = np.abs(exclusion.value(batch)) >= plan.guard
            rejected += int(np.sum(~keep))
            batch = batch[keep]
        if rejected > plan.max_rejections:
            raise SamplingError(f"more than {plan.max_rejections} sample points rejected")
        accepted.append(batch)
        have += len(batch)
    pts = np.concatenate(accepted)[: plan.count]
    pts.setflags(write=False)
    return pts


@dataclass
class CheckReport:
    check: str
    verdict: str
    max_residual: Optional[float]
    worst_point: Optional[tuple]
    tolerance: float
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "worst_point": None if self.worst_point is None else list(self.worst_point),
            "tolerance": self.tolerance,
            "samples": self.samples,
            "seed": self.seed,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ------------------------------------------------------------ evaluation state


class Evaluation:
    """Chart and candidate fields at the plan's sample points."""

    def __init__(self, chart: KahlerChart, candidate: Optional[StructureCandidate],
                 plan: SamplePlan):
        self.chart = chart
        self.candidate = candidate
        self.plan = plan
        self.points = sample_points(chart, plan)
        self.cf = st.ChartFields(chart, self.points)
        self.fields = None if candidate is None else self.cf.candidate(candidate)

    def report(self, name, residual, tol, details=None, scale=None) -> CheckReport:
        """Build a report from per-point residuals."""
        r = np.asarray(residual, dtype=float)
        if scale is not None:
            r = r / scale
        details = dict(details or {})
        if r.size == 0:
            return self.verdict_only(name, NOT_APPLICABLE, tol, details)
        if np.any(~np.isfinite(r)):
            k = int(np.argmax(~np.isfinite(r)))
            details.setdefault("reason", "non-finite residual")
            return CheckReport(name, DEGENERATE, None, self.point(k), tol,
                               self.plan.count, self.plan.seed, details)
        k = int(np.argmax(r))
        worst = float(r[k])
        verdict = PASS if worst < tol else FAIL
        return CheckReport(name, verdict, worst, self.point(k), tol,
                           self.plan.count, self.plan.seed, details)

    def verdict_only(self, name, verdict, tol, details=None, point=None) -> CheckReport:
        return CheckReport(name, verdict, None, point, tol, self.plan.count, self.plan.seed,
                           dict(details or {}))

    def point(self, k: int) -> tuple:
        return tuple(float(x) for x in self.points[k])

    @property
    def chart_scale(self) -> np.ndarray:
        g, J = self.cf.g.v, self.cf.J.v
        return np.maximum(1.0, np.maximum(_pmax(g), _pmax(J)))


def _pmax(a) -> np.ndarray:
    """Pointwise max |a| over all slot axes (first axis is the sample axis)."""
    a = np.abs(np.asarray(a))
    return a.reshape(a.shape[0], -1).max(axis=1) if a.ndim > 1 else a


@lru_cache(maxsize=32)
def evaluation(chart: KahlerChart, candidate: Optional[StructureCandidate],
               plan: SamplePlan) -> Evaluation:
    return Evaluation(chart, candidate, plan)


def _guarded(name):
    """Turn evaluation failures into DEGENERATE reports."""

    def wrap(fn):
        def inner(chart, *args, plan: SamplePlan = None, tol: float = DEFAULT_TOL, **kw):
            plan = plan or SamplePlan()
            try:
                return fn(chart, *args, plan=plan, tol=tol, **kw)
            except (ExprError, geo.SingularMetric, tensor.SingularEndomorphism,
                    SamplingError, st.NotOmegaSkew) as exc:
                point = getattr(exc, "point", None)
                point = None if point is None else tuple(float(x) for x in point)
                verdict = NOT_APPLICABLE if isinstance(exc, st.NotOmegaSkew) else DEGENERATE
                return CheckReport(name, verdict, None, point, tol, plan.count, plan.seed,
                                   {"reason": str(exc)})

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        inner.check_name = name
        return inner

    return wrap


# --------------------------------------------------------------------- checks


@_guarded("kahler")
def check_kahler(chart: KahlerChart, *, plan, tol) -> CheckReport:
    """J^2 = -Id, g nondegenerate and Hermitian, d Omega = 0, nabla J = 0."""
    ev = evaluation(chart, None, plan)
    cf = ev.cf
    g, J = cf.g.v, cf.J.v
    n = chart.dim
    eye = np.eye(n)
    det = np.linalg.det(g)
    if np.any(np.abs(det) <= 1e-12):
        k = int(np.argmin(np.abs(det)))
        return ev.verdict_only("kahler", DEGENERATE, tol, {"reason": "degenerate metric"},
                               ev.point(k))
    parts = {
        "complex_structure": _pmax(np.einsum("...ik,...kj->...ij", J, J) + eye),
        "symmetric": _pmax(g - np.swapaxes(g, -1, -2)),
        "hermitian": _pmax(np.einsum("...ki,...kl,...lj->...ij", J, g, J) - g),
        "d_omega": _pmax(geo.exterior_derivative(cf.omega)),
        "nabla_J": _pmax(geo.covariant_derivative(cf.J, cf.conn)),
    }
    scale = ev.chart_scale
    residual = np.max(np.stack(list(parts.values())), axis=0)
    eig = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    details = {k: float(np.max(v / scale)) for k, v in parts.items()}
    details["indefinite"] = bool(np.any(eig < 0))
    return ev.report("kahler", residual, tol, details, scale)


@_guarded("omega_skew")
def check_omega_skew(chart, candidate, *, plan, tol) -> CheckReport:
    """max |Omega(AX, Y) - Omega(X, AY)| on coordinate fields."""
    ev = evaluation(chart, candidate, plan)
    cand = ev.fields
    A = cand.A_given if cand.A_given is not None else cand.A
    scale = np.maximum(1.0, _pmax(A.v))
    return ev.report("omega_skew", cand.omega_skew, tol, {}, scale)


def _requires_skew(ev: Evaluation, name: str, tol: float) -> Optional[CheckReport]:
    res = ev.fields.omega_skew / np.maximum(
        1.0, _pmax((ev.fields.A_given if ev.fields.A_given is not None else ev.fields.A).v))
    if np.max(res) >= tol:
        return ev.verdict_only(name, NOT_APPLICABLE, tol,
                               {"reason": "A is not Omega-skew-symmetric"})
    return None


@_guarded("classify")
def classify(chart, candidate, *, plan, tol) -> CheckReport:
    """Uniform cc / scc / neither label over samples, MIXED otherwise."""
    ev = evaluation(chart, candidate, plan)
    labels, zero = ev.fields.labels
    kinds = sorted(set(labels.tolist()))
    verdict = kinds[0] if len(kinds) == 1 else MIXED
    rc, ra = st.commutator_residuals(ev.fields.A.v, ev.cf.J.v)
    details = {
        "class": verdict,
        "cc_residual": float(np.max(rc / ev.fields.scale)),
        "scc_residual": float(np.max(ra / ev.fields.scale)),
        "degenerate_zero": bool(np.any(zero)),
        "counts": {k: int(np.sum(labels == k)) for k in kinds},
    }
    rep = ev.verdict_only("classify", PASS if verdict != MIXED else MIXED, tol, details)
    return rep


def candidate_class(chart, candidate, plan=None, tol=DEFAULT_TOL) -> str:
    rep = classify(chart, candidate, plan=plan, tol=tol)
    return rep.details.get("class", rep.verdict)


@_guarded("closed")
def check_closed(chart, candidate, *, plan, tol) -> CheckReport:
    """max |d Theta|."""
    ev = evaluation(chart, candidate, plan)
    c = ev.fields
    return ev.report("closed", _pmax(c.d_theta), tol, {}, c.scale)


@_guarded("property1")
def check_property1(chart, candidate, *, plan, tol) -> CheckReport:
    """Nijenhuis torsion of A vanishes."""
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "property1", tol)) is not None:
        return na
    c = ev.fields
    return ev.report("property1", _pmax(geo.nijenhuis_torsion(c.A)), tol, {}, c.scale)


@_guarded("property2")
def check_property2(chart, candidate, *, plan, tol) -> CheckReport:
    """sharp_Pi Theta is a Poisson bivector: [Psi, Psi] = 0."""
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "property2", tol)) is not None:
        return na
    c = ev.fields
    return ev.report("property2", _pmax(geo.schouten_bivector(c.psi, c.psi)), tol, {}, c.scale)


def _cyclic(t: np.ndarray) -> np.ndarray:
    return t + np.einsum("...jki->...ijk", t) + np.einsum("...kij->...ijk", t)


def _property3_parts(ev: Evaluation):
    c = ev.fields
    nth = c.nabla_theta  # nth[..., j, k, a] = (nabla_a Theta)_jk
    closed = _cyclic(np.einsum("...jki->...ijk", nth))
    # (nabla_{A d_i} Theta)(d_j, d_k) = A^a_i (nabla_a Theta)_jk
    compat = _cyclic(np.einsum("...ai,...jka->...ijk", c.A.v, nth))
    E, F, _, _ = c.efbc
    om = ev.cf.omega.v
    # Omega((nabla_X A)(Y), Z) with X, Y, Z coordinate fields
    eq12a = _cyclic(np.einsum("...iab,...iz->...abz", E, om))
    eq12b = _cyclic(np.einsum("...iab,...iz->...abz", F, om))
    return closed, compat, eq12a, eq12b


@_guarded("property3")
def check_property3(chart, candidate, *, plan, tol) -> CheckReport:
    """Cyclic sums of nabla_X Theta and nabla_{AX} Theta, cross-checked in Omega form."""
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "property3", tol)) is not None:
        return na
    c = ev.fields
    closed, compat, eq12a, eq12b = (_pmax(x) / c.scale for x in _property3_parts(ev))
    sub = {}
    for key, r in (("closedness", closed), ("compatibility", compat),
                   ("omega_form_closedness", eq12a), ("omega_form_compatibility", eq12b)):
        k = int(np.argmax(r))
        sub[key] = {"max_residual": float(r[k]), "verdict": PASS if r[k] < tol else FAIL}
    agree = (sub["closedness"]["verdict"] == sub["omega_form_closedness"]["verdict"]
             and sub["compatibility"]["verdict"] == sub["omega_form_compatibility"]["verdict"])
    details = {**sub, "omega_form_agrees": agree}
    return ev.report("property3", np.maximum(closed, compat), tol, details)


@_guarded("property4")
def check_property4(chart, candidate, *, plan, tol) -> CheckReport:
    """Theta~ with flat_Theta~ = flat_Theta o sharp_Pi o flat_Theta is closed."""
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "property4", tol)) is not None:
        return na
    c = ev.fields
    alt = st.tilde_theta_from_a(ev.cf.omega.v, c.A.v)
    self_check = float(np.max(_pmax(alt - c.tilde.v) / c.scale ** 3))
    return ev.report("property4", _pmax(geo.exterior_derivative(c.tilde)), tol,
                     {"two_formulas_residual": self_check}, c.scale ** 2)


@_guarded("deltaC")
def check_deltaC(chart, candidate, *, plan, tol) -> CheckReport:
    """delta^C(Theta^Theta) = 2 (delta^C Theta)^Theta; plain delta for cc / scc."""
    if chart.dim < 4:
        ev = evaluation(chart, candidate, plan)
        return ev.verdict_only("deltaC", NOT_APPLICABLE, tol, {"reason": "dim < 4"})
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "deltaC", tol)) is not None:
        return na
    c, cf = ev.fields, ev.cf
    kind = candidate_class(chart, candidate, plan, tol)
    tt = geo.multilinear(tensor.wedge2, c.theta, c.theta, valence=(0, 4))
    if kind in ("cc", "scc"):
        form = "delta"
        lhs = geo.codifferential(tt, cf.conn)
        rhs = 2.0 * tensor.wedge(geo.codifferential(c.theta, cf.conn), 1, c.theta.v, 2)
    else:
        form = "delta_C"
        ctt = geo.multilinear(lambda w, J: tensor.c_operator(w, J, 4), tt, cf.J, valence=(0, 4))
        cth = geo.multilinear(lambda w, J: tensor.c_operator(w, J, 2), c.theta, cf.J,
                              valence=(0, 2))
        lhs = tensor.c_operator(geo.codifferential(ctt, cf.conn), cf.J.v, 3)
        dc_theta = tensor.c_operator(geo.codifferential(cth, cf.conn), cf.J.v, 1)
        rhs = 2.0 * tensor.wedge(dc_theta, 1, c.theta.v, 2)
    return ev.report("deltaC", _pmax(lhs - rhs), tol, {"form": form, "class": kind},
                     c.scale ** 2)


def _project_args(T, J, sign, omega) -> np.ndarray:
    low = st.lower_vector_slot(T, omega)
    return st.project_pair(low, J, sign, (0, 1))


@_guarded("prop11")
def check_prop11(chart, candidate, *, plan, tol) -> CheckReport:
    """Type-projected conditions on B_A, C_A (cc) or E_A, F_A (scc)."""
    ev = evaluation(chart, candidate, plan)
    if (na := _requires_skew(ev, "prop11", tol)) is not None:
        return na
    kind = candidate_class(chart, candidate, plan, tol)
    if kind not in ("cc", "scc"):
        return ev.verdict_only("prop11", NOT_APPLICABLE, tol, {"class": kind})
    c, cf = ev.fields, ev.cf
    E, F, B, C = c.efbc
    om, J = cf.omega.v, cf.J.v
    if kind == "cc":
        parts = {"P~B": _project_args(B, J, -1, om), "P~C": _project_args(C, J, -1, om)}
    else:
        parts = {"PE": _project_args(E, J, +1, om), "PF": _project_args(F, J, +1, om)}
        # conditions on triples of type-(1,0) fields Z = X - iJX, split into Re and Im
        n = chart.dim
        M = np.eye(n)[None] - 1j * J
        for key, F3 in (("eq12_10", E), ("eq12_10_A", F)):
            t = _cyclic(np.einsum("...iab,...iz->...abz", F3, om))
            tc = np.einsum("...abz,...ap,...bq,...zr->...pqr", t, M, M, M)
            parts[key + "_re"] = tc.real
            parts[key + "_im"] = tc.imag
    res = {k: _pmax(v) / c.scale for k, v in parts.items()}
    details = {"class": kind, **{k: float(np.max(v)) for k, v in res.items()}}
    return ev.report("prop11", np.max(np.stack(list(res.values())), axis=0), tol, details)


@_guarded("parallel")
def check_parallel(chart, candidate, *, plan, tol, field: str = "theta") -> CheckReport:
    """max |nabla T| for T = Theta (default) or A."""
    ev = evaluation(chart, candidate, plan)
    c = ev.fields
    nab = c.nabla_theta if field == "theta" else c.nabla_A
    other = c.nabla_A if field == "theta" else c.nabla_theta
    details = {"field": field,
               ("nabla_A" if field == "theta" else "nabla_theta"):
                   float(np.max(_pmax(other) / c.scale))}
    return ev.report("parallel", _pmax(nab), tol, details, c.scale)


def _nondegenerate(ev: Evaluation, name: str, tol: float) -> Optional[CheckReport]:
    det = np.linalg.det(ev.fields.A.v)
    if np.any(np.abs(det) <= 1e-12):
        k = int(np.argmin(np.abs(det)))
        return ev.verdict_only(name, DEGENERATE, tol,
                               {"reason": "A is degenerate at a sample point"}, ev.point(k))
    return None


@_guarded("poisson_compatibility")
def check_poisson_compatibility(chart, candidate, *, plan, tol) -> CheckReport:
    """[Pi, Psi] = 0 with Psi the Poisson bivector of the symplectic form Theta."""
    ev = evaluation(chart, candidate, plan)
    name = "poisson_compatibility"
    if (na := _requires_skew(ev, name, tol)) is not None:
        return na
    if (dg := _nondegenerate(ev, name, tol)) is not None:
        return dg
    c, cf = ev.fields, ev.cf
    psi = c.theta_poisson
    # sharp_Psi = A^{-1} o sharp_Pi, as matrices Psi^T = A^{-1} Pi^T
    sharp = np.einsum("...ik,...jk->...ij", c.A_inv.v, cf.pi.v)
    eqA = float(np.max(_pmax(np.swapaxes(psi.v, -1, -2) - sharp) / _pmax(psi.v).clip(1.0)))
    closed = _pmax(c.d_theta) / c.scale
    bracket = _pmax(geo.schouten_bivector(cf.pi, psi))
    scale = np.maximum(1.0, _pmax(psi.v)) * ev.chart_scale
    details = {"sharp_identity_residual": eqA, "closedness": float(np.max(closed)),
               "sharp_identity_ok": eqA < 1e-9}
    rep = ev.report(name, np.maximum(bracket / scale, closed), tol, details)
    return rep


@_guarded("inverse_closed")
def check_inverse_closed(chart, candidate, *, plan, tol) -> CheckReport:
    """Theta and Theta' (the form of A^{-1}) are both closed."""
    ev = evaluation(chart, candidate, plan)
    name = "inverse_closed"
    if (na := _requires_skew(ev, name, tol)) is not None:
        return na
    if (dg := _nondegenerate(ev, name, tol)) is not None:
        return dg
    c, cf = ev.fields, ev.cf
    tp = c.theta_prime
    direct = -np.einsum("...ki,...kj->...ij", c.A_inv.v, cf.omega.v)
    tp_scale = np.maximum(1.0, _pmax(tp.v))
    dt = _pmax(c.d_theta) / c.scale
    dtp = _pmax(geo.exterior_derivative(tp)) / tp_scale
    details = {
        "d_theta": float(np.max(dt)),
        "d_theta_prime": float(np.max(dtp)),
        "theta_prime_formulas_residual": float(np.max(_pmax(direct - tp.v) / tp_scale)),
    }
    return ev.report(name, np.maximum(dt, dtp), tol, details)


@_guarded("orthogonal_product")
def check_orthogonal_product(chart, candidate, *, plan, tol) -> CheckReport:
    """For cc orthogonal almost product A: K.c.N. iff Theta closed, and then Nij_A = 0."""
    ev = evaluation(chart, candidate, plan)
    name = "orthogonal_product"
    c, cf = ev.fields, ev.cf
    A, g = c.A.v, cf.g.v
    n = chart.dim
    sq = _pmax(np.einsum("...ik,...kj->...ij", A, A) - np.eye(n)) / c.scale
    orth = _pmax(np.einsum("...ki,...kl,...lj->...ij", A, g, A) - g) / (c.scale ** 2)
    rc, _ = st.commutator_residuals(A, cf.J.v)
    rc = rc / c.scale
    applicable = {"square_is_identity": float(np.max(sq)), "orthogonal": float(np.max(orth)),
                  "cc": float(np.max(rc))}
    if max(applicable.values()) >= tol:
        return ev.verdict_only(name, NOT_APPLICABLE, tol, applicable)
    closed = _pmax(c.d_theta) / c.scale
    nij = _pmax(geo.nijenhuis_torsion(c.A)) / c.scale
    details = {**applicable, "closedness": float(np.max(closed)),
               "nijenhuis": float(np.max(nij))}
    if np.max(closed) < tol:
        details["integrable"] = bool(np.max(nij) < tol)
        return ev.report(name, np.maximum(closed, nij), tol, details)
    return ev.report(name, closed, tol, details)


@_guarded("rank")
def rank_analysis(chart, candidate, *, plan, tol) -> CheckReport:
    """Pointwise rank of A, ker A = ker Theta, ker A orthogonal to im A, J(im A) = im A."""
    ev = evaluation(chart, candidate, plan)
    c, cf = ev.fields, ev.cf
    kind = candidate_class(chart, candidate, plan, tol)
    ranks = []
    worst = {"ker_A_in_ker_theta": 0.0, "ker_theta_in_ker_A": 0.0,
             "ker_perp_im": 0.0, "J_invariant_image": 0.0}
    per_point = np.zeros(len(ev.points))
    for k in range(len(ev.points)):
        A, th, g, J = c.A.v[k], c.theta.v[k], cf.g.v[k], cf.J.v[k]
        s = float(c.scale[k])
        r, ker, im = tensor.rank_with_kernel(A, tol)
        _, ker_th, _ = tensor.rank_with_kernel(th, tol)
        ranks.append(r)
        vals = {
            "ker_A_in_ker_theta": _norm(th.T @ ker) / s,
            "ker_theta_in_ker_A": _norm(A @ ker_th) / s,
            "ker_perp_im": _norm(ker.T @ g @ im) / max(1.0, _norm(g)),
        }
        if ker_th.shape[1] != ker.shape[1]:
            vals["ker_A_in_ker_theta"] = max(vals["ker_A_in_ker_theta"], 1.0)
        if kind in ("cc", "scc"):
            Jim = J @ im
            vals["J_invariant_image"] = _norm(Jim - im @ (im.T @ Jim)) / max(1.0, _norm(J))
        for key, v in vals.items():
            worst[key] = max(worst[key], v)
        per_point[k] = max(vals.values())
    regular = len(set(ranks)) == 1
    details = {"ranks": sorted(set(ranks)), "regular": regular, "class": kind, **worst}
    rep = ev.report("rank", per_point, tol, details)
    if rep.verdict == PASS and not regular:
        rep.verdict = MIXED
    return rep


def _norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


@_guarded("remark21")
def check_remark21(chart, candidate, *, plan, tol) -> CheckReport:
    """Identities relating C_A, B_A, B_{A^{-1}} and Nij_A for cc nondegenerate A.

    Checked forms::

        C_A(X, Y) = -A(B_{A^{-1}}(AX, AY))
        -A^{-1}(Nij_A(X, Y)) = 2 [B_{A^{-1}}(AX, AY) + B_A(X, Y)]
    """
    ev = evaluation(chart, candidate, plan)
    name = "remark21"
    if (na := _requires_skew(ev, name, tol)) is not None:
        return na
    kind = candidate_class(chart, candidate, plan, tol)
    if kind != "cc":
        return ev.verdict_only(name, NOT_APPLICABLE, tol, {"class": kind})
    if (dg := _nondegenerate(ev, name, tol)) is not None:
        return ev.verdict_only(name, NOT_APPLICABLE, tol, dg.details, dg.worst_point)
    c = ev.fields
    residual, details = remark21_residuals(c)
    return ev.report(name, residual, tol, details)


def remark21_residuals(c: st.CandidateFields):
    """Per-point residuals of the two identities, plus a details dict."""
    A, Ainv = c.A.v, c.A_inv.v
    _, _, BA, CA = c.efbc
    Binv = tensor.alt12(np.swapaxes(c.nabla_A_inv, -1, -2))
    Binv_AA = np.einsum("...icd,...ca,...db->...iab", Binv, A, A)
    A_Binv_AA = np.einsum("...ik,...kab->...iab", A, Binv_AA)
    nij = geo.nijenhuis_torsion(c.A)
    lhs = -np.einsum("...ik,...kab->...iab", Ainv, nij)
    inv_scale = np.maximum(1.0, _pmax(Ainv))
    scale = c.scale ** 3 * inv_scale ** 2
    bc = _pmax(CA + A_Binv_AA) / scale
    plus = _pmax(CA - A_Binv_AA) / scale
    nb = _pmax(lhs - 2.0 * (Binv_AA + BA)) / scale
    details = {"C_from_B_inverse": float(np.max(bc)), "nijenhuis_from_B": float(np.max(nb)),
               "C_from_B_inverse_plus_sign": float(np.max(plus))}
    return np.maximum(bc, nb), details


# ---------------------------------------------------------------------- suites

SUITES = {
    "kahler": ("kahler",),
    "kcn": ("kahler", "omega_skew", "classify", "closed", *CHARACTERIZATIONS,
            "deltaC", "parallel"),
    "rank": ("kahler", "omega_skew", "classify", "rank"),
    "remark21": ("kahler", "omega_skew", "classify", "remark21"),
    "all": ("kahler", "omega_skew", "classify", "closed", *CHARACTERIZATIONS, "deltaC",
            "prop11", "parallel", "poisson_compatibility", "inverse_closed",
            "orthogonal_product", "rank", "remark21"),
}

# checks whose verdict never decides the exit status
INFORMATIONAL = {"classify", "deltaC", "parallel"}

CHECKS = {
    "omega_skew": check_omega_skew,
    "classify": classify,
    "closed": check_closed,
    "property1": check_property1,
    "property2": check_property2,
    "property3": check_property3,
    "property4": check_property4,
    "deltaC": check_deltaC,
    "prop11": check_prop11,
    "parallel": check_parallel,
    "poisson_compatibility": check_poisson_compatibility,
    "inverse_closed": check_inverse_closed,
    "orthogonal_product": check_orthogonal_product,
    "rank": rank_analysis,
    "remark21": check_remark21,
}


def kcn_verdict(reports: dict) -> str:
    """Conjunction of Kähler, Omega-skew, closedness and characterizations 1-4."""
    needed = ("kahler", "omega_skew", "closed", *CHARACTERIZATIONS)
    if any(k not in reports for k in needed):
        return NOT_APPLICABLE
    verdicts = [reports[k].verdict for k in needed]
    if all(v == PASS for v in verdicts):
        return PASS
    if reports["kahler"].verdict == DEGENERATE:
        return DEGENERATE
    return FAIL


def characterization_verdicts(reports: dict) -> dict:
    out = {k: reports[k].verdict for k in ("property1", "property2", "property4")}
    p3 = reports["property3"]
    out["property3"] = p3.details.get("compatibility", {}).get("verdict", p3.verdict)
    return dict(sorted(out.items()))


def agreement(reports: dict) -> dict:
    """Cross-characterization agreement, asserted only for closed Theta."""
    if any(k not in reports for k in ("closed", *CHARACTERIZATIONS)):
        return {"asserted": False, "reason": "characterizations not run", "ok": True}
    verdicts = characterization_verdicts(reports)
    closed = reports["closed"].verdict == PASS
    result = {"asserted": closed, "verdicts": verdicts, "ok": True}
    if not closed:
        result["reason"] = "Theta is not closed"
        return result
    if len(set(verdicts.values())) != 1:
        result["ok"] = False
    p3 = reports["property3"]
    if not p3.details.get("omega_form_agrees", True):
        result["ok"] = False
        result["omega_form_disagreement"] = True
    return result


def run_suite(chart: KahlerChart, candidates, plan: SamplePlan = None,
              tol: float = DEFAULT_TOL, suite: str = "all") -> dict:
    """Run every check of ``suite`` on each candidate; returns a plain dict report."""
    plan = plan or SamplePlan()
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    names = SUITES[suite]
    kahler = check_kahler(chart, plan=plan, tol=tol)
    out = {"chart": chart.name, "suite": suite, "samples": plan.count, "seed": plan.seed,
           "tolerance": tol, "candidates": []}
    for cand in candidates:
        reports = {"kahler": kahler}
        for name in names:
            if name != "kahler":
                reports[name] = CHECKS[name](chart, cand, plan=plan, tol=tol)
        entry = {"candidate": cand.label,
                 "checks": [reports[n].to_dict() for n in names]}
        if "property1" in reports:
            kcn = kcn_verdict(reports)
            entry["kcn"] = kcn
            entry["agreement"] = agreement(reports)
            for key in ("poisson_compatibility", "inverse_closed", "prop11"):
                if key in reports and reports[key].verdict in (PASS, FAIL):
                    ref = reports["property3"].verdict if key == "prop11" else kcn
                    same = reports[key].verdict == ref
                    entry["agreement"].setdefault("consistency", {})[key] = same
                    if not same:
                        entry["agreement"]["ok"] = False
            if "deltaC" in reports:
                entry["agreement"]["deltaC_observed"] = reports["deltaC"].verdict
        entry["gating"] = _gating_verdict(reports, names)
        out["candidates"].append(entry)
    return out


def _gating_verdict(reports: dict, names) -> str:
    for n in names:
        if n in INFORMATIONAL:
            continue
        if reports[n].verdict in (FAIL, MIXED, DEGENERATE) and not (
                n in ("poisson_compatibility", "inverse_closed") and
                reports[n].verdict == DEGENERATE):
            return FAIL
    return PASS
