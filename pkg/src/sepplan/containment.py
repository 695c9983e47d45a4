"""Containment residuals: keep the vehicle body inside the drivable canvas.

As with separation, residual entries g <= 0 exactly when containment holds,
evaluation of violated configurations is not an error, and everything is
smooth in its arguments. Polytope-inner kinds need no auxiliary variables
(vertex containment is necessary and sufficient for convex containers); the
ellipsoid-in-ellipsoid kind carries a scalar multiplier and a triangular
factor enforcing semidefiniteness of the S-procedure matrix through smooth
equalities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Ellipsoid, GeometryError, Polytope


class ContainKind(enum.Enum):
    POLY_IN_POLY = "poly_in_poly"
    POLY_IN_ELL = "poly_in_ell"
    ELL_IN_POLY = "ell_in_poly"
    ELL_IN_ELL = "ell_in_ell"


class FactorizationError(ValueError):
    """No real triangular factorization exists (matrix not PSD)."""


def aux_count(kind: ContainKind, n_dim: int) -> int:
    """Auxiliary variables a containment block adds to the NLP."""
    if kind is ContainKind.ELL_IN_ELL:
        # scalar multiplier + packed lower-triangular factor of size N+1
        return 1 + (n_dim + 1) * (n_dim + 2) // 2
    return 0


@dataclass
class ContainmentConstraintBlock:
    """One (body part, canvas part, step) containment slot."""

    kind: ContainKind
    body_index: int
    canvas_index: int
    step_index: int
    aux_offset: int
    n_dim: int = 2

    @property
    def aux_count(self) -> int:
        return aux_count(self.kind, self.n_dim)

    @property
    def label(self) -> str:
        return f"b{self.body_index}w{self.canvas_index}k{self.step_index}"


def contain_poly_in_poly(V, canvas: Polytope) -> np.ndarray:
    """Every vertex inside every canvas face: rows (vertex-major) A v - b."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != canvas.n_dim:
        raise GeometryError(
            f"vertex matrix {V.shape} does not match canvas in R^{canvas.n_dim}")
    return (canvas.A @ V - canvas.b[:, None]).T.ravel()


def contain_poly_in_poly_jac(V, canvas: Polytope) -> np.ndarray:
    """d residual / d vec(V) (vertices flattened column-major, i.e. per vertex)."""
    V = np.asarray(V, dtype=float)
    nv = V.shape[1]
    nf, n = canvas.A.shape
    J = np.zeros((nv * nf, nv * n))
    for i in range(nv):
        J[i * nf:(i + 1) * nf, i * n:(i + 1) * n] = canvas.A
    return J


def contain_poly_in_ell(V, canvas: Ellipsoid) -> np.ndarray:
    """Every vertex inside the ellipsoid: rows (v-e)^T E (v-e) - 1."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != canvas.n_dim:
        raise GeometryError(
            f"vertex matrix {V.shape} does not match canvas in R^{canvas.n_dim}")
    d = V - canvas.e[:, None]
    return np.einsum("ik,ij,jk->k", d, canvas.E, d) - 1.0


def contain_poly_in_ell_jac(V, canvas: Ellipsoid) -> np.ndarray:
    """d residual / d vec(V), one row per vertex."""
    V = np.asarray(V, dtype=float)
    n, nv = V.shape
    d = V - canvas.e[:, None]
    grads = 2.0 * (canvas.E @ d)  # (n, nv), gradient of row k w.r.t. v_k
    J = np.zeros((nv, nv * n))
    for i in range(nv):
        J[i, i * n:(i + 1) * n] = grads[:, i]
    return J


def contain_ell_in_poly(ell: Ellipsoid, canvas: Polytope) -> np.ndarray:
    """Support value per canvas face: sqrt(p_f^T E^-1 p_f) + p_f^T e - b_f."""
    if ell.n_dim != canvas.n_dim:
        raise GeometryError("ellipsoid and canvas dimensions differ")
    P = canvas.A
    quad = np.einsum("fi,ij,fj->f", P, ell.E_inv, P)
    return np.sqrt(quad) + P @ ell.e - canvas.b


def contain_ell_in_poly_jac_center(ell: Ellipsoid, canvas: Polytope) -> np.ndarray:
    """d residual / d center e (shape the builder chains through the pose)."""
    return canvas.A.copy()


class ContainEllResidual(NamedTuple):
    """Split residual for the ellipsoid-in-ellipsoid block.

    ``eq`` must vanish (matching of G(lam) with Ups Ups^T); ``ineq`` <= 0
    collects -diag(Ups) and -lam, i.e. factor-diagonal and multiplier
    nonnegativity.
    """

    eq: np.ndarray
    ineq: np.ndarray


def tril_pack(M: np.ndarray) -> np.ndarray:
    """Pack the lower triangle of a square matrix row-major."""
    M = np.asarray(M, dtype=float)
    i, j = np.tril_indices(M.shape[0])
    return M[i, j]


def tril_unpack(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of tril_pack."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != n * (n + 1) // 2:
        raise GeometryError(
            f"packed triangle needs {n * (n + 1) // 2} entries, got {v.shape[0]}")
    M = np.zeros((n, n))
    i, j = np.tril_indices(n)
    M[i, j] = v
    return M


def g_matrix(inner: Ellipsoid, outer: Ellipsoid, lam: float) -> np.ndarray:
    """S-procedure matrix whose PSD-ness certifies inner ⊆ outer.

    G = [[lam*E_in - E_out,            E_out e_out - lam E_in e_in],
         [(E_out e_out - lam E_in e_in)^T,
          lam e_in^T E_in e_in - e_out^T E_out e_out - lam + 1]]
    """
    if inner.n_dim != outer.n_dim:
        raise GeometryError("ellipsoid dimensions differ")
    lam = float(lam)
    n = inner.n_dim
    G = np.zeros((n + 1, n + 1))
    G[:n, :n] = lam * inner.E - outer.E
    v = outer.E @ outer.e - lam * (inner.E @ inner.e)
    G[:n, n] = v
    G[n, :n] = v
    G[n, n] = (lam * (inner.e @ inner.E @ inner.e)
               - outer.e @ outer.E @ outer.e - lam + 1.0)
    return G


def g_matrix_dlam(inner: Ellipsoid) -> np.ndarray:
    """d G / d lam (constant in lam)."""
    n = inner.n_dim
    D = np.zeros((n + 1, n + 1))
    D[:n, :n] = inner.E
    v = -(inner.E @ inner.e)
    D[:n, n] = v
    D[n, :n] = v
    D[n, n] = inner.e @ inner.E @ inner.e - 1.0
    return D


def contain_ell_in_ell(inner: Ellipsoid, outer: Ellipsoid, lam: float,
                       ups: np.ndarray) -> ContainEllResidual:
    """S-procedure containment via an explicit triangular factor.

    ``ups`` may be the packed lower triangle or the full (N+1, N+1) matrix.
    Feasibility (eq rows zero, ineq rows <= 0) certifies inner ⊆ outer.
    """
    n1 = inner.n_dim + 1
    ups = np.asarray(ups, dtype=float)
    L = ups if ups.ndim == 2 else tril_unpack(ups, n1)
    if L.shape != (n1, n1):
        raise GeometryError(f"factor must be {n1}x{n1}, got {L.shape}")
    G = g_matrix(inner, outer, lam)
    eq = tril_pack(G - L @ L.T)
    ineq = np.concatenate([-np.diag(L), [-float(lam)]])
    return ContainEllResidual(eq=eq, ineq=ineq)


def contain_ell_in_ell_jac(inner: Ellipsoid, outer: Ellipsoid, lam: float,
                           ups: np.ndarray):
    """Jacobians of the eq rows w.r.t. [lam, packed ups].

    Returns (J_lam (m,), J_ups (m, m)) with m = (N+1)(N+2)/2 packed rows.
    """
    n1 = inner.n_dim + 1
    ups = np.asarray(ups, dtype=float)
    L = ups if ups.ndim == 2 else tril_unpack(ups, n1)
    rows_i, rows_j = np.tril_indices(n1)
    m = rows_i.shape[0]
    J_lam = g_matrix_dlam(inner)[rows_i, rows_j]
    J_ups = np.zeros((m, m))
    # d(L L^T)_{ij} / d L_{ab} = delta_ia L_jb + delta_ja L_ib
    for r in range(m):
        i, j = rows_i[r], rows_j[r]
        for c in range(m):
            a, b = rows_i[c], rows_j[c]
            val = 0.0
            if i == a:
                val += L[j, b]
            if j == a:
                val += L[i, b]
            J_ups[r, c] = -val
    return J_lam, J_ups


def psd_cholesky(G: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Lower-triangular factor with nonnegative diagonal for a PSD matrix.

    Handles singular (rank-deficient) matrices; raises FactorizationError
    when no real factorization exists, i.e. the matrix has an eigenvalue
    below -tol * scale.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise GeometryError(f"matrix must be square, got {G.shape}")
    if np.abs(G - G.T).max() > 1e-8 * max(1.0, np.abs(G).max()):
        raise GeometryError("matrix must be symmetric")
    n = G.shape[0]
    scale = max(1.0, float(np.abs(G).max()))
    L = np.zeros((n, n))
    for j in range(n):
        d = G[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol * scale:
            raise FactorizationError(
                f"pivot {j} is negative ({d:.3e}); matrix is not PSD")
        d = max(d, 0.0)
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            rest = G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if L[j, j] > np.sqrt(tol) * np.sqrt(scale):
                L[j + 1:, j] = rest / L[j, j]
            else:
                # zero pivot: a PSD matrix must have (numerically) zero
                # coupling below it; leave the column zero and let the
                # reconstruction check below catch violations
                L[j + 1:, j] = 0.0
    err = np.abs(G - L @ L.T).max()
    if err > 200.0 * np.sqrt(tol) * scale:
        raise FactorizationError(
            f"reconstruction residual {err:.3e} exceeds tolerance; "
            "matrix is not PSD")
    return L


def residual_of(kind: ContainKind, inner, outer, aux=None):
    """Dispatch a containment residual by kind."""
    if kind is ContainKind.POLY_IN_POLY:
        return contain_poly_in_poly(inner, outer)
    if kind is ContainKind.POLY_IN_ELL:
        return contain_poly_in_ell(inner, outer)
    if kind is ContainKind.ELL_IN_POLY:
        return contain_ell_in_poly(inner, outer)
    if kind is ContainKind.ELL_IN_ELL:
        aux = np.asarray(aux, dtype=float)
        return contain_ell_in_ell(inner, outer, aux[0], aux[1:])
    raise GeometryError(f"unknown containment kind {kind}")
