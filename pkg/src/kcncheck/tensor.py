"""Pointwise multilinear algebra on dense component tables.

Index conventions, fixed once for the whole package:

* a (1,1)-tensor ``A`` is stored as ``A[i, j] = A^i_j`` so ``(AX)^i = A[i, j] X^j``;
* a 2-covariant tensor ``T`` is stored as ``T[i, j] = T(d_i, d_j)``;
* a bivector ``P`` is stored as ``P[i, j] = P(dx^i, dx^j)``;
* contravariant slots come before covariant slots.

With these conventions ``beta(sharp_P alpha) = P(alpha, beta)`` forces
``(sharp_P alpha)^i = P[j, i] alpha_j``.

Every function treats the trailing axes as tensor slots and broadcasts over
any leading (batch) axes, so the same code serves one point or many.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class DimensionMismatch(ValueError):
    pass


class SingularEndomorphism(ValueError):
    """Raised when an endomorphism that must be inverted is (nearly) singular."""

    def __init__(self, message: str, det=None, index=None):
        super().__init__(message)
        self.det = det
        self.index = index


@dataclass(frozen=True)
class TensorValue:
    """Dense component table with declared valence (p contravariant, q covariant)."""

    components: np.ndarray
    p: int
    q: int
    antisymmetric: bool = False

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", comps)
        rank = self.p + self.q
        if comps.ndim != rank or (rank and len(set(comps.shape)) != 1):
            raise DimensionMismatch(
                f"valence ({self.p},{self.q}) needs a square table of rank {rank}, "
                f"got shape {comps.shape}")
        if self.antisymmetric and antisymmetry_defect(comps, rank) > 1e-12:
            raise ValueError("components are not antisymmetric")

    @property
    def dim(self) -> int:
        return self.components.shape[0] if self.components.ndim else 0

    @property
    def valence(self) -> tuple:
        return (self.p, self.q)

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)


def _check_dims(*arrays):
    dims = {a.shape[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")


def antisymmetry_defect(t, rank: int) -> float:
    """Max |t + t o transposition| over adjacent slot transpositions."""
    t = np.asarray(t)
    worst = 0.0
    for k in range(rank - 1):
        a, b = t.ndim - rank + k, t.ndim - rank + k + 1
        worst = max(worst, float(np.max(np.abs(t + np.swapaxes(t, a, b)), initial=0.0)))
    return worst


def sharp_bivector(P, alpha) -> np.ndarray:
    """``(sharp_P alpha)^i = P^{ji} alpha_j``."""
    P, alpha = np.asarray(P), np.asarray(alpha)
    _check_dims(P, alpha)
    return np.einsum("...ji,...j->...i", P, alpha)


def flat_form(T, X) -> np.ndarray:
    """``(flat_T X)_j = T_{ij} X^i``."""
    T, X = np.asarray(T), np.asarray(X)
    _check_dims(T, X)
    return np.einsum("...ij,...i->...j", T, X)


def sharp_g(g_inv, alpha) -> np.ndarray:
    """Raise an index with the inverse metric."""
    g_inv, alpha = np.asarray(g_inv), np.asarray(alpha)
    _check_dims(g_inv, alpha)
    return np.einsum("...ij,...j->...i", g_inv, alpha)


def invert_endomorphism(A, tol: float = 1e-12) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    det = np.linalg.det(A)
    bad = np.abs(det) <= tol
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0]) if np.ndim(bad) else None
        raise SingularEndomorphism(
            f"|det A| = {float(np.min(np.abs(det))):.3g} <= {tol:g}", det=det, index=idx)
    return np.linalg.inv(A)


def wedge(a, p: int, b, q: int) -> np.ndarray:
    """Wedge product of a p-form and a q-form (shuffle normalisation).

    ``(a^b)(X_1..X_{p+q}) = sum over (p,q)-shuffles s of sign(s) a(X_s..)b(X_s..)``,
    so that ``(dx^dy)(d_x, d_y) = 1``.
    """
    a, b = np.asarray(a), np.asarray(b)
    n = a.shape[-1] if p else b.shape[-1]
    if p and q:
        _check_dims(a, b)
    r = p + q
    batch = np.broadcast_shapes(a.shape[: a.ndim - p], b.shape[: b.ndim - q])
    out = np.zeros(batch + (n,) * r)
    if r > n:
        return out
    letters = "abcdefghijklmnop"[:r]
    for first in itertools.combinations(range(r), p):
        rest = tuple(k for k in range(r) if k not in first)
        perm = first + rest
        sign = _perm_sign(perm)
        sub_a = "".join(letters[k] for k in first)
        sub_b = "".join(letters[k] for k in rest)
        out = out + sign * np.einsum(f"...{sub_a},...{sub_b}->...{letters}", a, b)
    return out


def wedge2(a, b) -> np.ndarray:
    """Wedge product of two 2-forms; zero when dim < 4."""
    return wedge(a, 2, b, 2)


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def alt12(T) -> np.ndarray:
    """Alternate a vector-valued bilinear map over its two arguments."""
    T = np.asarray(T)
    return 0.5 * (T - np.swapaxes(T, -1, -2))


def rank_with_kernel(A, tol: float = 1e-8):
    """Numerical rank, orthonormal kernel basis and image basis of an endomorphism.

    Singular values count toward the rank when larger than
    ``tol * max(1, largest singular value)``. Bases are returned as columns.
    """
    A = np.asarray(A, dtype=float)
    u, s, vt = np.linalg.svd(A)
    cutoff = tol * max(1.0, float(s[0]) if s.size else 1.0)
    rank = int(np.sum(s > cutoff))
    kernel = vt[rank:].T
    image = u[:, :rank]
    return rank, kernel, image


def c_operator(omega, J, p: int = None) -> np.ndarray:
    """``(C omega)(X_1, .., X_p) = omega(J X_1, .., J X_p)``."""
    omega, J = np.asarray(omega), np.asarray(J)
    if p is None:
        p = omega.ndim - (J.ndim - 2)
    # J must broadcast against the batch axes only, not the other slots
    batch = np.broadcast_shapes(omega.shape[:omega.ndim - p], J.shape[:-2])
    omega = np.broadcast_to(omega, batch + omega.shape[omega.ndim - p:])
    J = np.broadcast_to(J, batch + J.shape[-2:])
    Jb = J.reshape(batch + (1,) * max(p - 1, 0) + J.shape[-2:])
    out = omega
    for k in range(p):
        axis = out.ndim - p + k
        moved = np.moveaxis(out, axis, -1)
        moved = np.einsum("...k,...ki->...i", moved, Jb)
        out = np.moveaxis(moved, -1, axis)
    return out
