"""Kähler data and candidate structures as jet fields on a chart.

Matrix forms under the package conventions (see :mod:`kcncheck.tensor`)::

    Omega = J^T g                      Omega(X, Y) = g(JX, Y)
    Pi    = -Omega^{-1}                sharp_Pi o flat_Omega = -Id
    A     = Pi Theta                   A = sharp_Pi o flat_Theta
    Theta = -A^T Omega                 Theta(X, Y) = -Omega(AX, Y)
    Theta~ = Theta Pi Theta = -A^T Omega A
    Psi   = Pi Theta Pi^T              sharp_Pi applied to both slots of Theta
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import geometry as geo
from . import tensor
from .expr import Expression
from .geometry import JetField


class ChartInvariantError(ValueError):
    pass


class NotOmegaSkew(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"A is not Omega-skew-symmetric (max asymmetry {residual:.3g})")
        self.residual = residual


def _table(rows) -> tuple:
    return tuple(tuple(r) for r in rows)


@dataclass(frozen=True)
class KahlerChart:
    """Coordinate chart carrying a metric g and a complex structure J.

    ``g[i][j]`` and ``J[i][j]`` (= J^i_j) are Expressions over ``coords``.
    """

    name: str
    coords: tuple
    g: tuple
    J: tuple
    domain: tuple
    exclusion: Optional[Expression] = None

    def __post_init__(self):
        object.__setattr__(self, "g", _table(self.g))
        object.__setattr__(self, "J", _table(self.J))
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "domain", tuple(tuple(map(float, b)) for b in self.domain))
        n = len(self.coords)
        if n % 2:
            raise ChartInvariantError("dimension must be even")
        for tab, label in ((self.g, "g"), (self.J, "J")):
            if len(tab) != n or any(len(r) != n for r in tab):
                raise ChartInvariantError(f"{label} must be {n}x{n}")
        if len(self.domain) != n:
            raise ChartInvariantError("domain needs one interval per coordinate")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def fields(self, points) -> "ChartFields":
        return ChartFields(self, np.asarray(points, dtype=float))


@dataclass(frozen=True)
class StructureCandidate:
    """A candidate given by Theta (0,2), or by A (1,1), or both.

    When both are present Theta is canonical and A is only used to verify
    ``Theta(X, Y) = -Omega(AX, Y)``.
    """

    label: str = "main"
    theta: Optional[tuple] = None
    A: Optional[tuple] = None

    def __post_init__(self):
        if self.theta is None and self.A is None:
            raise ValueError("candidate needs theta or A")
        if self.theta is not None:
            object.__setattr__(self, "theta", _table(self.theta))
        if self.A is not None:
            object.__setattr__(self, "A", _table(self.A))


# ---------------------------------------------------------------- pointwise ops


def omega_from_gJ(g: JetField, J: JetField) -> JetField:
    """Omega_ij = J^k_i g_kj."""
    return geo.jet_einsum("ki,kj->ij", J, g, valence=(0, 2))


def pi_from_omega(omega: JetField) -> JetField:
    """The bivector with sharp_Pi o flat_Omega = -Id, i.e. Pi = -Omega^{-1}."""
    return -geo.inverse(omega, valence=(2, 0))


def a_from_theta(pi: JetField, theta: JetField) -> JetField:
    return geo.jet_einsum("ik,kj->ij", pi, theta, valence=(1, 1))


def omega_skew_residual(omega, A) -> np.ndarray:
    """Pointwise max |Omega(AX, Y) - Omega(X, AY)| over coordinate fields."""
    omega, A = np.asarray(omega), np.asarray(A)
    diff = np.einsum("...ki,...kj->...ij", A, omega) - np.einsum("...ik,...kj->...ij", omega, A)
    return np.max(np.abs(diff), axis=(-1, -2))


def theta_from_a(omega: JetField, A: JetField, tol: float = 1e-10) -> JetField:
    """Theta_ij = -A^k_i Omega_kj; A must be Omega-skew-symmetric."""
    res = float(np.max(omega_skew_residual(omega.v, A.v), initial=0.0))
    if res > tol:
        raise NotOmegaSkew(res)
    theta = -geo.jet_einsum("ki,kj->ij", A, omega, valence=(0, 2))
    # remove rounding asymmetry; the skew check above bounds what is discarded
    return JetField(0.5 * (theta.v - np.swapaxes(theta.v, -1, -2)),
                    0.5 * (theta.d - np.swapaxes(theta.d, -2, -3)), None, (0, 2))


def tilde_theta(theta: JetField, pi: JetField) -> JetField:
    """flat_Theta~ = flat_Theta o sharp_Pi o flat_Theta, i.e. Theta~ = Theta Pi Theta."""
    return geo.jet_einsum("ik,kl,lj->ij", theta, pi, theta, valence=(0, 2))


def tilde_theta_from_a(omega, A) -> np.ndarray:
    """Theta~(X, Y) = -Omega(AX, AY)."""
    return -np.einsum("...ki,...kl,...lj->...ij", np.asarray(A), np.asarray(omega), np.asarray(A))


def sharp_pi_form(pi: JetField, theta: JetField) -> JetField:
    """Psi(a, b) = Theta(sharp_Pi a, sharp_Pi b), i.e. Psi^{ab} = Pi^{ai} Theta_ij Pi^{bj}."""
    return geo.jet_einsum("ai,ij,bj->ab", pi, theta, pi, valence=(2, 0))


def projectors(t, J):
    """Split a 2-covariant tensor into J-invariant and J-anti-invariant parts."""
    t = np.asarray(t)
    ct = tensor.c_operator(t, J, 2)
    return 0.5 * (t + ct), 0.5 * (t - ct)


def project_pair(t, J, sign: int, slots=(0, 1)) -> np.ndarray:
    """Apply 1/2 (Id x Id + sign J x J) to two covariant slots of ``t``.

    ``slots`` count from the first tensor slot; ``t`` has shape (..., n, n, n).
    """
    t = np.asarray(t)
    J = np.asarray(J)
    a, b = slots
    nb = t.ndim - 3
    moved = np.moveaxis(t, (nb + a, nb + b), (-2, -1))
    Jb = J[..., None, :, :]
    ct = np.einsum("...kl,...ki,...lj->...ij", moved, Jb, Jb)
    out = 0.5 * (moved + sign * ct)
    return np.moveaxis(out, (-2, -1), (nb + a, nb + b))


def efbc(A: JetField, nabla_A: np.ndarray):
    """E_A(X,Y) = (nabla_X A)(Y), F_A(X,Y) = E_A(AX,Y), B/C their alternations.

    Arrays are (1,2) with layout ``E[..., i, a, b] = E_A(d_a, d_b)^i``.
    """
    E = np.swapaxes(nabla_A, -1, -2)
    F = np.einsum("...icb,...ca->...iab", E, A.v)
    return E, F, tensor.alt12(E), tensor.alt12(F)


def lower_vector_slot(T, omega) -> np.ndarray:
    """Omega(T(X, Y), Z) as a 3-covariant tensor ``[..., a, b, z]``."""
    return np.einsum("...iab,...iz->...abz", np.asarray(T), np.asarray(omega))


def commutator_residuals(A, J):
    """Pointwise max |AJ - JA| and max |AJ + JA|."""
    AJ = np.einsum("...ik,...kj->...ij", A, J)
    JA = np.einsum("...ik,...kj->...ij", J, A)
    return (np.max(np.abs(AJ - JA), axis=(-1, -2)),
            np.max(np.abs(AJ + JA), axis=(-1, -2)))


def classify_cc_scc(A, J, tol: float = 1e-8, scale=1.0):
    """Per-point labels 'cc', 'scc' or 'neither' plus a degeneracy mask (A = 0)."""
    rc, ra = commutator_residuals(np.asarray(A), np.asarray(J))
    rc, ra = rc / scale, ra / scale
    cc, scc = rc < tol, ra < tol
    labels = np.where(cc, "cc", np.where(scc, "scc", "neither"))
    return labels, cc & scc


# ------------------------------------------------------------ field bundles


class ChartFields:
    """Chart fields evaluated at a batch of points, built lazily."""

    def __init__(self, chart: KahlerChart, points: np.ndarray):
        self.chart = chart
        self.points = points

    @cached_property
    def g(self) -> JetField:
        return geo.field_from_expressions(self.chart.g, self.points, (0, 2))

    @cached_property
    def J(self) -> JetField:
        return geo.field_from_expressions(self.chart.J, self.points, (1, 1))

    @cached_property
    def omega(self) -> JetField:
        return omega_from_gJ(self.g, self.J)

    @cached_property
    def pi(self) -> JetField:
        return pi_from_omega(self.omega)

    @cached_property
    def conn(self) -> geo.ConnectionData:
        return geo.christoffel(self.g)

    def candidate(self, cand: StructureCandidate, skew_tol: float = 1e-10) -> "CandidateFields":
        return CandidateFields(self, cand, skew_tol)


class CandidateFields:
    """Derived jet fields of one candidate at the sample points."""

    def __init__(self, cf: ChartFields, cand: StructureCandidate, skew_tol: float = 1e-10):
        self.cf = cf
        self.cand = cand
        self.skew_tol = skew_tol

    @cached_property
    def A_given(self) -> Optional[JetField]:
        if self.cand.A is None:
            return None
        return geo.field_from_expressions(self.cand.A, self.cf.points, (1, 1))

    @cached_property
    def theta(self) -> JetField:
        if self.cand.theta is not None:
            return geo.field_from_expressions(self.cand.theta, self.cf.points, (0, 2))
        return theta_from_a(self.cf.omega, self.A_given, self.skew_tol)

    @cached_property
    def A(self) -> JetField:
        if self.cand.theta is None:
            return self.A_given
        return a_from_theta(self.cf.pi, self.theta)

    @cached_property
    def omega_skew(self) -> np.ndarray:
        """Pointwise skew residual of A (and Theta/A consistency when both given)."""
        res = omega_skew_residual(self.cf.omega.v, (self.A_given or self.A).v)
        if self.cand.theta is not None and self.A_given is not None:
            implied = -np.einsum("...ki,...kj->...ij", self.A_given.v, self.cf.omega.v)
            res = np.maximum(res, np.max(np.abs(implied - self.theta.v), axis=(-1, -2)))
        return res

    @cached_property
    def scale(self) -> np.ndarray:
        """max(1, |Theta|, |A|) per point, the residual normalisation."""
        s = np.maximum(np.max(np.abs(self.theta.v), axis=(-1, -2)),
                       np.max(np.abs(self.A.v), axis=(-1, -2)))
        return np.maximum(1.0, s)

    @cached_property
    def nabla_theta(self) -> np.ndarray:
        return geo.covariant_derivative(self.theta, self.cf.conn)

    @cached_property
    def nabla_A(self) -> np.ndarray:
        return geo.covariant_derivative(self.A, self.cf.conn)

    @cached_property
    def d_theta(self) -> np.ndarray:
        return geo.exterior_derivative(self.theta)

    @cached_property
    def tilde(self) -> JetField:
        return tilde_theta(self.theta, self.cf.pi)

    @cached_property
    def psi(self) -> JetField:
        return sharp_pi_form(self.cf.pi, self.theta)

    @cached_property
    def efbc(self):
        return efbc(self.A, self.nabla_A)

    @cached_property
    def labels(self):
        return classify_cc_scc(self.A.v, self.cf.J.v, scale=self.scale)

    # nondegenerate regime ------------------------------------------------

    @cached_property
    def A_inv(self) -> JetField:
        return geo.inverse(self.A, valence=(1, 1), singular=tensor.SingularEndomorphism)

    @cached_property
    def theta_poisson(self) -> JetField:
        """Bivector Psi of the symplectic form Theta, normalised by sharp_Psi = A^{-1} o sharp_Pi.

        This gives Psi = Theta^{-1} and sharp_Psi o flat_Theta = +Id.
        """
        inv = geo.inverse(self.theta, valence=(2, 0), singular=tensor.SingularEndomorphism)
        return inv

    @cached_property
    def theta_prime(self) -> JetField:
        """flat_Theta' = flat_Omega o sharp_Psi o flat_Omega, i.e. Theta' = Omega Psi Omega."""
        om = self.cf.omega
        return geo.jet_einsum("ia,ab,bj->ij", om, self.theta_poisson, om, valence=(0, 2))

    @cached_property
    def nabla_A_inv(self) -> np.ndarray:
        return geo.covariant_derivative(self.A_inv, self.cf.conn)
