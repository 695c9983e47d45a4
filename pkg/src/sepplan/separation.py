"""Separating-hyperplane residuals for pairwise disjointness of convex sets.

Every residual vector g here satisfies: g <= 0 elementwise exactly when the
corresponding separation certificate holds, with the plane normal kept away
from zero by a smooth guard row eps^2 - ||lam||^2 <= 0. Residuals are smooth
in all arguments wherever ||lam|| > 0; evaluating an infeasible
configuration is never an error, it simply yields positive entries. Only
malformed inputs (shape mismatches, numerically zero directions where a
square root would lose its gradient) raise.

Side convention: the first operand (the vehicle body in the planner) lies on
the lam^T s >= mu side for polytope-first kinds and on the <= side when the
first operand is an ellipsoid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import (
    LAMBDA_MIN,
    Ellipsoid,
    GeometryError,
    ellipsoid_support,
    ellipsoid_support_gradient,
)


class SepKind(enum.Enum):
    POLY_POLY = "poly_poly"
    ELL_ELL = "ell_ell"
    POLY_ELL = "poly_ell"
    POINT_POLY = "point_poly"
    POINT_POLY_REDUCED = "point_poly_reduced"
    POLY_POLY_NORMALIZED = "poly_poly_normalized"
    POLY_POLY_FIXED_COMPONENT = "poly_poly_fixed_component"


def aux_count(kind: SepKind, n_dim: int) -> int:
    """Auxiliary variables a block of this kind adds to the NLP."""
    if kind in (SepKind.POLY_POLY, SepKind.ELL_ELL, SepKind.POLY_ELL,
                SepKind.POINT_POLY):
        return n_dim + 1
    if kind in (SepKind.POINT_POLY_REDUCED, SepKind.POLY_POLY_NORMALIZED):
        return n_dim
    if kind is SepKind.POLY_POLY_FIXED_COMPONENT:
        if n_dim != 2:
            raise GeometryError("fixed-component variant is planar only")
        return 2
    raise GeometryError(f"unknown separation kind {kind}")


@dataclass
class SeparationConstraintBlock:
    """One (body part, obstacle, step) slot in the NLP's auxiliary vector."""

    kind: SepKind
    body_index: int
    obstacle_index: int
    step_index: int
    aux_offset: int
    n_dim: int = 2
    # True when the first operand sits on the lam^T s >= mu side.
    body_on_plus_side: bool = True

    @property
    def aux_count(self) -> int:
        return aux_count(self.kind, self.n_dim)

    @property
    def label(self) -> str:
        return f"b{self.body_index}o{self.obstacle_index}k{self.step_index}"


def _verts(V, name: str) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise GeometryError(f"{name} must be a vertex matrix, got {V.shape}")
    return V


def _lam(lam, n_dim: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n_dim,):
        raise GeometryError(f"lam must have shape ({n_dim},), got {lam.shape}")
    return lam


def sep_poly_poly(V1, V2, lam, mu, eps: float = LAMBDA_MIN) -> np.ndarray:
    """Plane puts conv(V1) on the >= side, conv(V2) on the <= side.

    Rows: [mu - lam^T v1_i, lam^T v2_j - mu, eps^2 - lam^T lam].
    """
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    if V1.shape[0] != V2.shape[0]:
        raise GeometryError("vertex matrices live in different dimensions")
    lam = _lam(lam, V1.shape[0])
    g1 = mu - lam @ V1
    g2 = lam @ V2 - mu
    return np.concatenate([g1, g2, [eps ** 2 - lam @ lam]])


def sep_poly_poly_jac(V1, V2, lam, mu) -> np.ndarray:
    """d residual / d [lam, mu], rows ordered as in sep_poly_poly."""
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    n = V1.shape[0]
    lam = _lam(lam, n)
    n1, n2 = V1.shape[1], V2.shape[1]
    J = np.zeros((n1 + n2 + 1, n + 1))
    J[:n1, :n] = -V1.T
    J[:n1, n] = 1.0
    J[n1:n1 + n2, :n] = V2.T
    J[n1:n1 + n2, n] = -1.0
    J[-1, :n] = -2.0 * lam
    return J


def sep_ell_ell(ell1: Ellipsoid, ell2: Ellipsoid, lam, mu,
                eps: float = LAMBDA_MIN) -> np.ndarray:
    """Plane puts ell1 on the <= side, ell2 on the >= side.

    Rows: [support_1(lam) - mu, mu - (lam^T e2 - sqrt(lam^T E2^-1 lam)),
    eps^2 - lam^T lam].
    """
    lam = _lam(lam, ell1.n_dim)
    if ell1.n_dim != ell2.n_dim:
        raise GeometryError("ellipsoids live in different dimensions")
    g1 = ellipsoid_support(ell1, lam) - mu
    # min over ell2 of lam^T s = lam^T e2 - sqrt(lam^T E2^-1 lam)
    g2 = mu - (lam @ ell2.e - np.sqrt(lam @ ell2.E_inv @ lam))
    return np.array([g1, g2, eps ** 2 - lam @ lam])


def sep_ell_ell_jac(ell1: Ellipsoid, ell2: Ellipsoid, lam, mu) -> np.ndarray:
    lam = _lam(lam, ell1.n_dim)
    n = lam.shape[0]
    J = np.zeros((3, n + 1))
    J[0, :n] = ellipsoid_support_gradient(ell1, lam)
    J[0, n] = -1.0
    Ei_lam = ell2.E_inv @ lam
    q = lam @ Ei_lam
    if q < 1e-24:
        raise GeometryError("support direction is numerically zero")
    J[1, :n] = Ei_lam / np.sqrt(q) - ell2.e
    J[1, n] = 1.0
    J[2, :n] = -2.0 * lam
    return J


def sep_poly_ell(V, ell: Ellipsoid, lam, mu, eps: float = LAMBDA_MIN) -> np.ndarray:
    """Plane puts conv(V) on the >= side, the ellipsoid on the <= side.

    Rows: [mu - lam^T v_i, support_ell(lam) - mu, eps^2 - lam^T lam].
    """
    V = _verts(V, "V")
    lam = _lam(lam, V.shape[0])
    if ell.n_dim != V.shape[0]:
        raise GeometryError("polytope and ellipsoid dimensions differ")
    g1 = mu - lam @ V
    g2 = ellipsoid_support(ell, lam) - mu
    return np.concatenate([g1, [g2, eps ** 2 - lam @ lam]])


def sep_poly_ell_jac(V, ell: Ellipsoid, lam, mu) -> np.ndarray:
    V = _verts(V, "V")
    n = V.shape[0]
    lam = _lam(lam, n)
    nv = V.shape[1]
    J = np.zeros((nv + 2, n + 1))
    J[:nv, :n] = -V.T
    J[:nv, n] = 1.0
    J[nv, :n] = ellipsoid_support_gradient(ell, lam)
    J[nv, n] = -1.0
    J[nv + 1, :n] = -2.0 * lam
    return J


def sep_point_poly(p, V, lam, mu, eps: float = LAMBDA_MIN) -> np.ndarray:
    """Plane puts the point on the >= side, conv(V) on the <= side."""
    V = _verts(V, "V")
    p = np.asarray(p, dtype=float)
    lam = _lam(lam, V.shape[0])
    if p.shape != (V.shape[0],):
        raise GeometryError(f"point must have shape ({V.shape[0]},)")
    g0 = mu - lam @ p
    g1 = lam @ V - mu
    return np.concatenate([[g0], g1, [eps ** 2 - lam @ lam]])


def sep_point_poly_jac(p, V, lam, mu) -> np.ndarray:
    V = _verts(V, "V")
    p = np.asarray(p, dtype=float)
    n = V.shape[0]
    lam = _lam(lam, n)
    nv = V.shape[1]
    J = np.zeros((nv + 2, n + 1))
    J[0, :n] = -p
    J[0, n] = 1.0
    J[1:1 + nv, :n] = V.T
    J[1:1 + nv, n] = -1.0
    J[-1, :n] = -2.0 * lam
    return J


def sep_point_poly_reduced(p, V, lam, eps: float = LAMBDA_MIN) -> np.ndarray:
    """Offset-free point/polytope variant: lam^T V <= (lam^T p) 1.

    Sufficient for strict separation (not necessary at touching contact);
    drops mu so a block costs only N auxiliaries.
    """
    V = _verts(V, "V")
    p = np.asarray(p, dtype=float)
    lam = _lam(lam, V.shape[0])
    g = lam @ V - lam @ p
    return np.concatenate([g, [eps ** 2 - lam @ lam]])


def sep_point_poly_reduced_jac(p, V, lam) -> np.ndarray:
    V = _verts(V, "V")
    p = np.asarray(p, dtype=float)
    n = V.shape[0]
    lam = _lam(lam, n)
    nv = V.shape[1]
    J = np.zeros((nv + 1, n))
    J[:nv, :] = (V - p[:, None]).T
    J[-1, :] = -2.0 * lam
    return J


def sep_poly_poly_normalized(V1, V2, lam, eps: float = LAMBDA_MIN) -> np.ndarray:
    """Offset-normalized variant: lam^T V1 >= 1, lam^T V2 <= 1.

    Sufficient only (the implicit plane level is pinned at 1), N auxiliaries.
    """
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    lam = _lam(lam, V1.shape[0])
    g1 = 1.0 - lam @ V1
    g2 = lam @ V2 - 1.0
    return np.concatenate([g1, g2, [eps ** 2 - lam @ lam]])


def sep_poly_poly_normalized_jac(V1, V2, lam) -> np.ndarray:
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    n = V1.shape[0]
    lam = _lam(lam, n)
    n1, n2 = V1.shape[1], V2.shape[1]
    J = np.zeros((n1 + n2 + 1, n))
    J[:n1, :] = -V1.T
    J[n1:n1 + n2, :] = V2.T
    J[-1, :] = -2.0 * lam
    return J


def sep_poly_poly_fixed_component(V1, V2, lam_free, mu,
                                  eps: float = LAMBDA_MIN) -> np.ndarray:
    """Planar variant with the normal pinned to (lam_free, 1).

    Two auxiliaries per block; the guard keeps the free component away from
    zero so the normal never degenerates. Planar sets only.
    """
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    if V1.shape[0] != 2 or V2.shape[0] != 2:
        raise GeometryError("fixed-component variant is planar only")
    lam = np.array([float(lam_free), 1.0])
    g1 = mu - lam @ V1
    g2 = lam @ V2 - mu
    return np.concatenate([g1, g2, [eps ** 2 - float(lam_free) ** 2]])


def sep_poly_poly_fixed_component_jac(V1, V2, lam_free, mu) -> np.ndarray:
    """d residual / d [lam_free, mu]."""
    V1, V2 = _verts(V1, "V1"), _verts(V2, "V2")
    n1, n2 = V1.shape[1], V2.shape[1]
    J = np.zeros((n1 + n2 + 1, 2))
    J[:n1, 0] = -V1[0, :]
    J[:n1, 1] = 1.0
    J[n1:n1 + n2, 0] = V2[0, :]
    J[n1:n1 + n2, 1] = -1.0
    J[-1, 0] = -2.0 * float(lam_free)
    return J


def residual_of(kind: SepKind, first, second, aux, eps: float = LAMBDA_MIN):
    """Dispatch a residual by block kind; aux packs (lam[, mu])."""
    aux = np.asarray(aux, dtype=float)
    if kind is SepKind.POLY_POLY:
        return sep_poly_poly(first, second, aux[:-1], aux[-1], eps)
    if kind is SepKind.ELL_ELL:
        return sep_ell_ell(first, second, aux[:-1], aux[-1], eps)
    if kind is SepKind.POLY_ELL:
        return sep_poly_ell(first, second, aux[:-1], aux[-1], eps)
    if kind is SepKind.POINT_POLY:
        return sep_point_poly(first, second, aux[:-1], aux[-1], eps)
    if kind is SepKind.POINT_POLY_REDUCED:
        return sep_point_poly_reduced(first, second, aux, eps)
    if kind is SepKind.POLY_POLY_NORMALIZED:
        return sep_poly_poly_normalized(first, second, aux, eps)
    if kind is SepKind.POLY_POLY_FIXED_COMPONENT:
        return sep_poly_poly_fixed_component(first, second, aux[0], aux[1], eps)
    raise GeometryError(f"unknown separation kind {kind}")


def jacobian_of(kind: SepKind, first, second, aux) -> np.ndarray:
    """Dispatch the exact Jacobian w.r.t. the block's auxiliaries."""
    aux = np.asarray(aux, dtype=float)
    if kind is SepKind.POLY_POLY:
        return sep_poly_poly_jac(first, second, aux[:-1], aux[-1])
    if kind is SepKind.ELL_ELL:
        return sep_ell_ell_jac(first, second, aux[:-1], aux[-1])
    if kind is SepKind.POLY_ELL:
        return sep_poly_ell_jac(first, second, aux[:-1], aux[-1])
    if kind is SepKind.POINT_POLY:
        return sep_point_poly_jac(first, second, aux[:-1], aux[-1])
    if kind is SepKind.POINT_POLY_REDUCED:
        return sep_point_poly_reduced_jac(first, second, aux)
    if kind is SepKind.POLY_POLY_NORMALIZED:
        return sep_poly_poly_normalized_jac(first, second, aux)
    if kind is SepKind.POLY_POLY_FIXED_COMPONENT:
        return sep_poly_poly_fixed_component_jac(first, second, aux[0], aux[1])
    raise GeometryError(f"unknown separation kind {kind}")
