"""Differential operators on tensor fields over a coordinate chart.

Fields are carried as :class:`JetField` objects: component values plus first
(and, for fields read straight from expressions, second) partial derivatives.
Derivative axes are appended after the tensor slots, so
``field.d[..., i, j, l] = d_l field[..., i, j]``.
Leading axes are batch axes (sample points).

Sign conventions:

* Christoffel symbols ``gamma[k, i, j] = Gamma^k_{ij}``.
* ``nabla T`` keeps T's slots and appends the differentiation slot last:
  ``(nabla T)[..., s, a] = (nabla_a T)_s``.
* Codifferential ``(delta w)_{i2..ip} = -g^{ab} (nabla_a w)_{b i2..ip}``.
* Curvature ``R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj} + Gamma^i_{km} Gamma^m_{lj}
  - Gamma^i_{lm} Gamma^m_{kj}``, Ricci is the (i, k) contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import tensor
from .expr import eval_jet2


class MissingJetData(ValueError):
    pass


class SingularMetric(ValueError):
    pass


@dataclass(frozen=True)
class JetField:
    """A tensor field sampled with its partial derivatives."""

    v: np.ndarray
    d: np.ndarray
    dd: Optional[np.ndarray] = None
    valence: tuple = (0, 0)

    @property
    def rank(self) -> int:
        return self.valence[0] + self.valence[1]

    @property
    def dim(self) -> int:
        return self.d.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.v.shape[: self.v.ndim - self.rank]

    def transpose(self) -> "JetField":
        """Swap the two slots of a rank-2 field."""
        if self.rank != 2:
            raise ValueError("transpose needs a rank-2 field")
        dd = None if self.dd is None else np.swapaxes(self.dd, -3, -4)
        p, q = self.valence
        return JetField(np.swapaxes(self.v, -1, -2), np.swapaxes(self.d, -2, -3), dd, (q, p))

    def scale(self, c: float) -> "JetField":
        dd = None if self.dd is None else c * self.dd
        return JetField(c * self.v, c * self.d, dd, self.valence)

    def __add__(self, other: "JetField") -> "JetField":
        dd = None if self.dd is None or other.dd is None else self.dd + other.dd
        return JetField(self.v + other.v, self.d + other.d, dd, self.valence)

    def __sub__(self, other: "JetField") -> "JetField":
        return self + other.scale(-1.0)

    def __neg__(self) -> "JetField":
        return self.scale(-1.0)


def field_from_expressions(table, points, valence) -> JetField:
    """Evaluate a nested table of Expressions into a JetField with 2-jets."""
    arr = np.asarray(table, dtype=object)
    points = np.asarray(points, dtype=float)
    batch = points.shape[:-1]
    m = points.shape[-1]
    v = np.empty(batch + arr.shape)
    d = np.empty(batch + arr.shape + (m,))
    dd = np.empty(batch + arr.shape + (m, m))
    for idx in np.ndindex(arr.shape):
        jet = eval_jet2(arr[idx], points)
        sl = (Ellipsis,) + idx
        v[sl] = jet.value
        d[sl + (slice(None),)] = jet.gradient
        dd[sl + (slice(None), slice(None))] = jet.hessian
    return JetField(v, d, dd, tuple(valence))


def constant_field(values, batch_shape, valence) -> JetField:
    values = np.asarray(values, dtype=float)
    m = values.shape[-1] if values.ndim else 0
    v = np.broadcast_to(values, tuple(batch_shape) + values.shape).copy()
    return JetField(v, np.zeros(v.shape + (m,)), np.zeros(v.shape + (m, m)), tuple(valence))


def multilinear(f: Callable, *args, valence) -> JetField:
    """Apply a function multilinear in its arguments, propagating 1-jets.

    ``f`` must broadcast over leading axes. Non-JetField arguments are treated
    as constants.
    """
    values = [a.v if isinstance(a, JetField) else a for a in args]
    v = f(*values)
    d = None
    for k, a in enumerate(args):
        if not isinstance(a, JetField):
            continue
        moved = list(values)
        moved[k] = np.moveaxis(a.d, -1, 0)
        term = np.moveaxis(f(*moved), 0, -1)
        d = term if d is None else d + term
    if d is None:
        raise ValueError("multilinear needs at least one JetField argument")
    return JetField(v, d, None, tuple(valence))


def jet_einsum(subscripts: str, *args, valence) -> JetField:
    """``np.einsum`` on slot indices (batch axes implicit) with 1-jet propagation."""
    lhs, rhs = subscripts.split("->")
    spec = ",".join("..." + s for s in lhs.split(",")) + "->..." + rhs
    return multilinear(lambda *xs: np.einsum(spec, *xs), *args, valence=valence)


def matmul(a: JetField, b: JetField, valence=(1, 1)) -> JetField:
    return jet_einsum("ij,jk->ik", a, b, valence=valence)


def inverse(a: JetField, valence=None, singular=SingularMetric, tol: float = 1e-12) -> JetField:
    """Matrix inverse of a rank-2 field, using d(M^-1) = -M^-1 (dM) M^-1."""
    det = np.linalg.det(a.v)
    if np.any(np.abs(det) <= tol):
        raise singular(f"matrix field is singular (|det| = {float(np.min(np.abs(det))):.3g})")
    inv = np.linalg.inv(a.v)
    d = -np.einsum("...ij,...jkz,...kl->...ilz", inv, a.d, inv)
    if valence is None:
        p, q = a.valence
        valence = (q, p)
    return JetField(inv, d, None, tuple(valence))


# ------------------------------------------------------------------ connection


@dataclass(frozen=True)
class ConnectionData:
    """Levi-Civita connection at sample points."""

    gamma: np.ndarray
    gamma_derivatives: Optional[np.ndarray] = None
    g_inv: Optional[np.ndarray] = None


def christoffel(g: JetField) -> ConnectionData:
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    det = np.linalg.det(g.v)
    if np.any(np.abs(det) <= 1e-12):
        raise SingularMetric("metric is degenerate at a sample point")
    ginv = np.linalg.inv(g.v)
    dg = g.d  # dg[..., a, b, c] = d_c g_ab
    s = (np.einsum("...jli->...ijl", dg) + np.einsum("...ilj->...ijl", dg)
         - dg)
    gamma = 0.5 * np.einsum("...kl,...ijl->...kij", ginv, s)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    dgamma = None
    if g.dd is not None:
        ddg = g.dd  # ddg[..., a, b, c, m] = d_m d_c g_ab
        dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv)
        ds = (np.einsum("...jlim->...ijlm", ddg) + np.einsum("...iljm->...ijlm", ddg)
              - ddg)
        dgamma = 0.5 * (np.einsum("...klm,...ijl->...kijm", dginv, s)
                        + np.einsum("...kl,...ijlm->...kijm", ginv, ds))
        dgamma = 0.5 * (dgamma + np.swapaxes(dgamma, -2, -3))
    return ConnectionData(gamma, dgamma, ginv)


_SLOT_LETTERS = "bcdefghijmnopqrstuvw"


def covariant_derivative(T: JetField, conn: ConnectionData) -> np.ndarray:
    """``nabla T`` with the differentiation slot appended last."""
    if T.d is None:
        raise MissingJetData("covariant derivative needs a 1-jet")
    p, q = T.valence
    r = p + q
    slots = _SLOT_LETTERS[:r]
    out = np.array(T.d, copy=True)
    for s in range(r):
        src = slots[:s] + "l" + slots[s + 1:]
        dst = slots[:s] + "k" + slots[s + 1:]
        if s < p:
            out = out + np.einsum(f"...kal,...{src}->...{dst}a", conn.gamma, T.v)
        else:
            out = out - np.einsum(f"...lak,...{src}->...{dst}a", conn.gamma, T.v)
    return out


def exterior_derivative_array(d: np.ndarray, p: int) -> np.ndarray:
    """Exterior derivative from partials ``d[..., i1..ip, z] = d_z w_{i1..ip}``."""
    nb = d.ndim - p - 1
    out = None
    for k in range(p + 1):
        term = np.moveaxis(d, -1, nb + k)
        term = term if k % 2 == 0 else -term
        out = term if out is None else out + term
    return out


def exterior_derivative(omega: JetField, p: int = None) -> np.ndarray:
    """``(dw)_{i0..ip} = sum_k (-1)^k d_{ik} w_{i0..^ik..ip}``."""
    if omega.d is None:
        raise MissingJetData("exterior derivative needs a 1-jet")
    p = omega.rank if p is None else p
    return exterior_derivative_array(omega.d, p)


def exterior_derivative_field(omega: JetField) -> JetField:
    """dw together with its own 1-jet; needs the 2-jet of w."""
    if omega.dd is None:
        raise MissingJetData("d of a field as a jet needs a 2-jet")
    p = omega.rank
    v = exterior_derivative_array(omega.d, p)
    # dd[..., s, z, m]: move m (the outer derivative) to the front as a batch axis
    dd = np.moveaxis(omega.dd, -1, 0)
    d = np.moveaxis(exterior_derivative_array(dd, p), 0, -1)
    return JetField(v, d, None, (0, p + 1))


def lie_bracket(X: JetField, Y: JetField) -> np.ndarray:
    """``[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i``."""
    return (np.einsum("...j,...ij->...i", X.v, Y.d)
            - np.einsum("...j,...ij->...i", Y.v, X.d))


def nijenhuis_torsion(A: JetField) -> np.ndarray:
    """Components ``N[..., i, j, k] = Nij_A(d_j, d_k)^i``."""
    a, da = A.v, A.d  # da[..., i, j, l] = d_l A^i_j
    t1 = np.einsum("...lj,...ikl->...ijk", a, da)
    t3 = np.einsum("...il,...lkj->...ijk", a, da)
    t = t1 - t3
    return t - np.swapaxes(t, -1, -2)


def schouten_bivector(P: JetField, Q: JetField) -> np.ndarray:
    """``[P, Q]^{ijk} = sum_cycl(i,j,k) (P^{li} d_l Q^{jk} + Q^{li} d_l P^{jk})``."""
    t = (np.einsum("...li,...jkl->...ijk", P.v, Q.d)
         + np.einsum("...li,...jkl->...ijk", Q.v, P.d))
    return t + np.einsum("...jki->...ijk", t) + np.einsum("...kij->...ijk", t)


def codifferential(omega: JetField, conn: ConnectionData, g_inv=None) -> np.ndarray:
    """``(delta w)_{i2..ip} = -g^{ab} (nabla_a w)_{b i2..ip}``."""
    g_inv = conn.g_inv if g_inv is None else g_inv
    if g_inv is None:
        raise SingularMetric("codifferential needs the inverse metric")
    p = omega.rank
    nab = covariant_derivative(omega, conn)
    rest = _SLOT_LETTERS[1:p]
    return -np.einsum(f"...ab,...b{rest}a->...{rest}", g_inv, nab)


def c_operator(omega, J) -> np.ndarray:
    return tensor.c_operator(omega, J)


def ricci(g: JetField, J=None, conn: ConnectionData = None):
    """Ricci tensor and, when J is given, the Ricci form rho(X, Y) = Ric(JX, Y)."""
    if g.dd is None:
        raise MissingJetData("Ricci curvature needs the 2-jet of g")
    conn = christoffel(g) if conn is None or conn.gamma_derivatives is None else conn
    gam, dgam = conn.gamma, conn.gamma_derivatives  # dgam[..., k, i, j, m] = d_m Gamma^k_ij
    ric = (np.einsum("...ilji->...jl", dgam) - np.einsum("...iijl->...jl", dgam)
           + np.einsum("...iim,...mlj->...jl", gam, gam)
           - np.einsum("...ilm,...mij->...jl", gam, gam))
    form = None
    if J is not None:
        J = np.asarray(J)
        form = np.einsum("...ki,...kj->...ij", J, ric)
    return ric, form
